// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs of the command-line tool on a small synthetic scene.

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const char* kCli = AOMAP_CLI_PATH;

struct CliFixture {
  fs::path dir;

  CliFixture() {
    dir = fs::temp_directory_path() / "aomap_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream scene(dir / "scene.txt");
    scene << "aomap-scene 1\n"
             "plane 0 0 -1 -2.0\n"
             "cylinder 1.28 0 1.4 1.28 2.56 1.4 0.05\n"
             "keyframe 0 1.28 1.28 0.15 0 0 0 1\n"
             "frames 6\n";
    std::ofstream config(dir / "map.cfg");
    config << "map.resolution = 0.02\n"
              "map.depth = 7\n"
              "sensor.width = 160\n"
              "sensor.height = 120\n"
              "sensor.fx = 100\n"
              "sensor.fy = 100\n"
              "sensor.cx = 79.5\n"
              "sensor.cy = 59.5\n"
              "sensor.noise_model = linear\n"
              "sensor.noise_coeff = 0.05\n";
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(kCli) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + (dir / "stderr.txt").string();
    return std::system(cmd.c_str());
  }

  std::string stdout_text() const {
    std::ifstream in(dir / "stdout.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

}  // namespace

TEST_CASE_METHOD(CliFixture, "integrate, stats, slice, mesh, render, check") {
  const std::string map = (dir / "map.aom").string();
  REQUIRE(run("integrate --config " + (dir / "map.cfg").string() + " --input " +
              (dir / "scene.txt").string() + " --output " + map + " --stats " +
              (dir / "stats.csv").string()) == 0);
  REQUIRE(fs::exists(map));

  SECTION("stats CSV has a header and one row per frame") {
    std::ifstream csv(dir / "stats.csv");
    std::string line;
    int lines = 0;
    std::getline(csv, line);
    CHECK(line.find("nodes_updated") != std::string::npos);
    while (std::getline(csv, line)) {
      if (!line.empty()) ++lines;
    }
    CHECK(lines == 6);
  }

  SECTION("stats subcommand reports structure") {
    REQUIRE(run("stats --map " + map) == 0);
    const std::string out = stdout_text();
    CHECK(out.find("blocks ") != std::string::npos);
    CHECK(out.find("memory_bytes ") != std::string::npos);
  }

  SECTION("slice produces a PNG") {
    REQUIRE(run("slice --map " + map + " --axis y --coord 1.28 --out " +
                (dir / "slice.png").string()) == 0);
    CHECK(fs::file_size(dir / "slice.png") > 100);
  }

  SECTION("mesh produces PLY and OBJ") {
    REQUIRE(run("mesh --map " + map + " --out " + (dir / "mesh.ply").string()) == 0);
    CHECK(fs::file_size(dir / "mesh.ply") > 100);
    REQUIRE(run("mesh --map " + map + " --out " + (dir / "mesh.obj").string()) == 0);
    CHECK(fs::file_size(dir / "mesh.obj") > 100);
  }

  SECTION("render produces a depth image") {
    REQUIRE(run("render --map " + map + " --pose 1.28 1.28 0.3 0 0 0 1 --out " +
                (dir / "depth.png").string() + " --config " + (dir / "map.cfg").string()) == 0);
    CHECK(fs::file_size(dir / "depth.png") > 100);
  }

  SECTION("check reads JSON lines and answers verdicts") {
    std::ofstream req(dir / "segments.jsonl");
    req << R"({"start":[1.0,1.28,0.9],"end":[1.6,1.28,0.9],"radius":0.08})" << "\n";
    req << R"({"start":[1.0,1.28,1.4],"end":[1.6,1.28,1.4],"radius":0.08})" << "\n";
    req.close();
    const std::string cmd = std::string(kCli) + " check --map " + map + " < " +
                            (dir / "segments.jsonl").string() + " > " +
                            (dir / "verdicts.jsonl").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream verdicts(dir / "verdicts.jsonl");
    std::string line;
    REQUIRE(std::getline(verdicts, line));
    auto v1 = nlohmann::json::parse(line);
    CHECK(v1["verdict"] == "safe");
    CHECK(v1["checks"].get<int>() > 0);
    REQUIRE(std::getline(verdicts, line));
    auto v2 = nlohmann::json::parse(line);
    CHECK(v2["verdict"] == "unsafe");
  }

  SECTION("check with an empty stream writes nothing and succeeds") {
    const std::string cmd = std::string(kCli) + " check --map " + map + " < /dev/null > " +
                            (dir / "empty.jsonl").string();
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::file_size(dir / "empty.jsonl") == 0);
  }
}

TEST_CASE_METHOD(CliFixture, "bad inputs exit nonzero with one-line errors") {
  CHECK(run("stats --map " + (dir / "missing.aom").string()) != 0);
  std::ifstream err(dir / "stderr.txt");
  std::string line;
  REQUIRE(std::getline(err, line));
  CHECK(line.rfind("error: ", 0) == 0);

  std::ofstream bad(dir / "bad.cfg");
  bad << "map.resolutoin = 0.01\n";
  bad.close();
  CHECK(run("integrate --config " + (dir / "bad.cfg").string() + " --input " +
            (dir / "scene.txt").string() + " --output " + (dir / "x.aom").string()) != 0);
}
