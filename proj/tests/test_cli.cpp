// End-to-end exercises of the installed command-line tool. The test runner
// exports NNOC_CLI with the binary's path; running the suite by hand from
// the build directory falls back to ./nnoc.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "nnoc/io.hpp"
#include "scenes.hpp"

using namespace nnoc;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout and stderr combined
};

RunResult run_cli(const std::string& args) {
  const char* env = std::getenv("NNOC_CLI");
  const std::string cli = env ? env : "./nnoc";
  const std::string cmd = cli + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.exit_code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string tmp(const std::string& name) {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "nnoc_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return (dir / name).string();
}

const std::string& scene_ply() {
  static const std::string path = [] {
    const std::string p = tmp("scene.ply");
    write_ply(scenes::checker_cloud(5, 4), p);
    return p;
  }();
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage problems exit with code 2") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  CHECK(run_cli("encode only_one_arg").exit_code == 2);
  CHECK(run_cli("encode a b --variant bogus").exit_code == 2);
  CHECK(run_cli("encode a b --bitdepth 99").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("encode --help").exit_code == 0);
}

TEST_CASE("missing inputs exit with code 3") {
  const RunResult r = run_cli("encode " + tmp("absent.ply") + " " + tmp("x.bin"));
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("error") != std::string::npos);
  CHECK(run_cli("train " + tmp("absent.hist") + " --output " + tmp("x.mdl")).exit_code == 3);
}

TEST_CASE("corrupt or mismatched streams exit with code 4") {
  const std::string junk = tmp("junk.bin");
  write_file(junk, std::vector<uint8_t>{'N', 'N', 'O', 'C', 'B', 'S', 'T', '1', 9});
  CHECK(run_cli("decode " + junk + " " + tmp("junk.ply")).exit_code == 4);
}

TEST_CASE("verify round-trips through the real binary") {
  const RunResult r = run_cli("verify " + scene_ply() + " --variant fnnoc");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("LOSSLESS: OK") != std::string::npos);
}

TEST_CASE("encode emits a parseable tsv report and decode restores the cloud") {
  const std::string bin = tmp("scene.bin"), back = tmp("back.ply");
  const RunResult enc =
      run_cli("encode " + scene_ply() + " " + bin + " --variant fnnoc3 --report tsv");
  CHECK(enc.exit_code == 0);
  CHECK(enc.out.find("r\tcandidates\toccupied") != std::string::npos);
  CHECK(enc.out.find("bpov\t") != std::string::npos);

  const RunResult dec = run_cli("decode " + bin + " " + back);
  CHECK(dec.exit_code == 0);
  CHECK(requantize(read_ply(back), 5) == scenes::checker_cloud(5, 4));

  // Re-encoding the reconstruction gives the identical container.
  const std::string bin2 = tmp("scene2.bin");
  CHECK(run_cli("encode " + back + " " + bin2 + " --variant fnnoc3").exit_code == 0);
  CHECK(read_file(bin2) == read_file(bin));
}

TEST_CASE("collect, train, and encode with the trained model") {
  const std::string hist = tmp("scene.hist"), model = tmp("scene.mdl");
  const RunResult col =
      run_cli("collect " + scene_ply() + " --variant fnnoc3 --output " + hist);
  CHECK(col.exit_code == 0);
  CHECK(col.out.find("unique contexts") != std::string::npos);

  const RunResult trn = run_cli("train " + hist + " --output " + model +
                                " --max-epochs 6 --batch-size 2048 --report tsv");
  CHECK(trn.exit_code == 0);
  CHECK(trn.out.find("epoch\ttrain_bits\tval_bits\tbest") != std::string::npos);

  const RunResult ver =
      run_cli("verify " + scene_ply() + " --variant fnnoc3 --model " + model);
  CHECK(ver.exit_code == 0);
  CHECK(ver.out.find("LOSSLESS: OK") != std::string::npos);

  // Loading that model under a different variant is a mismatch, code 4.
  const RunResult bad =
      run_cli("encode " + scene_ply() + " " + tmp("bad.bin") + " --variant fnnoc2 --model " +
              model);
  CHECK(bad.exit_code == 4);
}

TEST_CASE("bench tabulates a directory against a baseline") {
  const fs::path dir = fs::path(tmp("bench_set"));
  fs::create_directories(dir);
  write_ply(scenes::random_cloud(3, 4, 50), (dir / "a.ply").string());
  write_ply(scenes::plane_cloud(4, 1, 1, 2, 2), (dir / "b.ply").string());
  const std::string base = tmp("baseline.tsv");
  write_file(base, [] {
    const std::string t = "a\t24.0\nb\t24.0\n";
    return std::vector<uint8_t>(t.begin(), t.end());
  }());
  const RunResult r =
      run_cli("bench " + dir.string() + " --baseline " + base + " --report tsv");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("cloud\tvoxels") != std::string::npos);
  CHECK(r.out.find("a\t50\t") != std::string::npos);
  CHECK(r.out.find("average") != std::string::npos);

  CHECK(run_cli("bench " + tmp("no_such_dir")).exit_code != 0);
}

TEST_CASE("log channel stays quiet unless asked") {
  const RunResult quiet = run_cli("verify " + scene_ply() + " --variant fnnoc3");
  CHECK(quiet.out.find("nnoc: reading") == std::string::npos);

  // popen runs through the shell, so the variable prefix applies.
  const char* env = std::getenv("NNOC_CLI");
  const std::string cli = env ? env : "./nnoc";
  FILE* p = popen(
      ("NNOC_LOG=1 " + cli + " verify " + scene_ply() + " --variant fnnoc3 2>&1").c_str(),
      "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  pclose(p);
  CHECK(out.find("nnoc: reading") != std::string::npos);
}

}  // TEST_SUITE
