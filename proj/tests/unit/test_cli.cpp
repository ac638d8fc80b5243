#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "goal/io_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(GOAL_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("goal_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("cli error codes") {
  const fs::path dir = scratch_dir("errors");
  Run r = run_cli("gen-data --seed 1 --n 0 --out " + dir.string());
  CHECK(r.code == 2);
  CHECK(r.out.rfind("ERROR validation:", 0) == 0);

  r = run_cli("gen-data --seed 1 --bogus 3");
  CHECK(r.code == 2);
  CHECK(r.out.rfind("ERROR validation:", 0) == 0);

  r = run_cli("eval --ckpt " + (dir / "none").string() + " --data " + dir.string() +
              " --out " + (dir / "r.csv").string());
  CHECK(r.code == 3);
  CHECK(r.out.rfind("ERROR io:", 0) == 0);

  r = run_cli("inspect " + (dir / "missing.gemb").string());
  CHECK(r.code == 3);

  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("cli pipeline end to end") {
  const fs::path dir = scratch_dir("pipeline");
  const std::string d = dir.string();
  REQUIRE(run_cli("gen-data --seed 5 --n 6 --out " + d + "/data").code == 0);
  CHECK(fs::exists(d + "/data.run.json"));

  Run r = run_cli("train --data " + d + "/data --ablation global_only --epochs 1 --batch 4 --seed 1 --out " +
                  d + "/warm");
  REQUIRE(r.code == 0);
  r = run_cli("match --ckpt " + d + "/warm --data " + d + "/data --out " + d + "/pairs.jsonl");
  REQUIRE(r.code == 0);
  r = run_cli("train --data " + d + "/data --pairs " + d + "/pairs.jsonl --init " + d +
              "/warm --epochs 1 --batch 4 --out " + d + "/goal");
  REQUIRE(r.code == 0);
  r = run_cli("eval --ckpt " + d + "/goal --data " + d + "/data --mode original --out " + d +
              "/report.csv --embeddings " + d + "/emb");
  REQUIRE(r.code == 0);
  CHECK(goal::read_file(d + "/report.csv").rfind("mode,T2I_R@1,", 0) == 0);

  r = run_cli("eval --ckpt " + d + "/goal --data " + d + "/data --mode joint --out " + d +
              "/joint.csv");
  CHECK(r.code == 2);

  r = run_cli("inspect " + d + "/goal");
  CHECK(r.code == 0);
  CHECK(r.out.find("d_model 64") != std::string::npos);
  r = run_cli("inspect " + d + "/emb/texts.gemb");
  CHECK(r.out.find("items 6  dim 64") != std::string::npos);
  r = run_cli("inspect " + d + "/pairs.jsonl");
  CHECK(r.code == 0);

  // Same flags, same bytes.
  REQUIRE(run_cli("gen-data --seed 5 --n 6 --out " + d + "/data2").code == 0);
  CHECK(goal::hash_path(d + "/data") == goal::hash_path(d + "/data2"));
  fs::remove_all(dir);
}

TEST_CASE("cli gradcheck passes on the tiny config") {
  const Run r = run_cli("gradcheck --config tiny");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("PASS", 0) == 0);
}
