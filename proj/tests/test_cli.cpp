#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli = KCM_CLI_PATH;

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "kcm_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream os(p);
  os << body;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run(const std::string& args, const fs::path& stderr_to = {}) {
  std::string cmd = std::string(cli) + " " + args;
  if (!stderr_to.empty()) cmd += " 2>" + stderr_to.string();
  cmd += " >/dev/null";
  const int raw = std::system(cmd.c_str());
  return WEXITSTATUS(raw);
}

}  // namespace

TEST_CASE("minimal config runs with defaults") {
  const auto dir = scratch() / "minimal";
  fs::remove_all(dir);
  write_file(scratch() / "fs.json",
             R"({"subcommand":"front-speed","q":0.9,"T":100,"N":100,"seed":1})");
  const int code = run("front-speed --config " + (scratch() / "fs.json").string() +
                       " --out " + dir.string());
  CHECK(code == 0);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "front_speed.csv"));
  CHECK(fs::exists(dir / "telemetry.json"));
  const auto report = read_file(dir / "report.json");
  CHECK(report.find("\"v_hat\"") != std::string::npos);
  CHECK(report.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("out-of-range q is rejected with a field path") {
  const auto cfg = scratch() / "badq.json";
  const auto err = scratch() / "badq.err";
  write_file(cfg, R"({"q":1.5,"T":100,"N":100,"seed":1})");
  const int code = run("front-speed --config " + cfg.string() + " --out " +
                           (scratch() / "badq_out").string(),
                       err);
  CHECK(code == 1);
  const auto msg = read_file(err);
  CHECK(msg.find("q") != std::string::npos);
  CHECK_FALSE(fs::exists(scratch() / "badq_out" / "report.json"));
}

TEST_CASE("all violations are reported at once") {
  const auto cfg = scratch() / "multi.json";
  const auto err = scratch() / "multi.err";
  write_file(cfg, R"({"q":2.0,"T":-5,"seed":1})");
  CHECK(run("front-speed --config " + cfg.string(), err) == 1);
  const auto msg = read_file(err);
  CHECK(msg.find("q:") != std::string::npos);
  CHECK(msg.find("T:") != std::string::npos);
  CHECK(msg.find("N:") != std::string::npos);
}

TEST_CASE("cutoff needs at least three sizes") {
  const auto cfg = scratch() / "cut1.json";
  const auto err = scratch() / "cut1.err";
  write_file(cfg,
             R"({"q":0.9,"L_list":[128],"v_hat":0.8,"w":4,"N":200,"seed":1})");
  CHECK(run("cutoff --config " + cfg.string(), err) == 1);
  CHECK(read_file(err).find("L_list") != std::string::npos);
}

TEST_CASE("unknown subcommand exits with an error") {
  write_file(scratch() / "any.json", R"({"seed":1})");
  CHECK(run("frobnicate --config " + (scratch() / "any.json").string()) == 1);
  CHECK(run("") == 1);
}

TEST_CASE("missing config file exits with an error") {
  CHECK(run("front-speed --config /nonexistent/nope.json") == 1);
}

TEST_CASE("reruns are byte-identical") {
  const auto cfg = scratch() / "det.json";
  write_file(cfg,
             R"({"q":0.9,"ells":[4,8],"ss":[10,20],"N":100,"seed":7})");
  const auto a = scratch() / "det_a";
  const auto b = scratch() / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("zeros --config " + cfg.string() + " --out " + a.string()) == 0);
  REQUIRE(run("zeros --config " + cfg.string() + " --out " + b.string()) == 0);
  CHECK(read_file(a / "report.json") == read_file(b / "report.json"));
  CHECK(read_file(a / "zeros.csv") == read_file(b / "zeros.csv"));
}

TEST_CASE("results are independent of the worker count") {
  const auto cfg = scratch() / "jobs.json";
  write_file(cfg, R"({"q":0.9,"T":100,"N":200,"seed":11})");
  const auto a = scratch() / "jobs_1";
  const auto b = scratch() / "jobs_8";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("front-speed --config " + cfg.string() + " --jobs 1 --out " +
              a.string()) == 0);
  REQUIRE(run("front-speed --config " + cfg.string() + " --jobs 8 --out " +
              b.string()) == 0);
  CHECK(read_file(a / "report.json") == read_file(b / "report.json"));
  CHECK(read_file(a / "front_speed.csv") == read_file(b / "front_speed.csv"));
}

TEST_CASE("seed flag overrides the config seed") {
  const auto cfg = scratch() / "seedover.json";
  write_file(cfg, R"({"q":0.9,"T":50,"N":50,"seed":1})");
  const auto a = scratch() / "seed_a";
  const auto b = scratch() / "seed_b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("front-speed --config " + cfg.string() + " --seed 2 --out " +
              a.string()) == 0);
  REQUIRE(run("front-speed --config " + cfg.string() + " --out " +
              b.string()) == 0);
  CHECK(read_file(a / "report.json") != read_file(b / "report.json"));
}

TEST_CASE("recorded events replay to a deterministic final state") {
  const auto rec_cfg = scratch() / "rec.json";
  const auto rec = scratch() / "rec_out";
  fs::remove_all(rec);
  write_file(rec_cfg, R"({"q":0.9,"seed":9,"horizon":5,"lo":1,"hi":6})");
  REQUIRE(run("replay --config " + rec_cfg.string() + " --out " +
              rec.string()) == 0);
  REQUIRE(fs::exists(rec / "events.csv"));

  const auto play_cfg = scratch() / "play.json";
  write_file(play_cfg, std::string(R"({"q":0.9,"seed":9,"horizon":5,"events":")") +
                           (rec / "events.csv").string() +
                           R"(","start":"interval:111111"})");
  const auto a = scratch() / "play_a";
  const auto b = scratch() / "play_b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run("replay --config " + play_cfg.string() + " --out " +
              a.string()) == 0);
  REQUIRE(run("replay --config " + play_cfg.string() + " --out " +
              b.string()) == 0);
  const auto ra = read_file(a / "report.json");
  CHECK(ra == read_file(b / "report.json"));
  CHECK(ra.find("interval:") != std::string::npos);
}

TEST_CASE("acceptance-rule failures exit with code 2") {
  // subcritical contact process: survival collapses, the rule fails
  const auto cfg = scratch() / "die.json";
  write_file(cfg, R"({"q":0.45,"T":150,"N":100,"seed":13})");
  const auto out = scratch() / "die_out";
  fs::remove_all(out);
  const int code = run("contact-speed --config " + cfg.string() + " --out " +
                       out.string());
  CHECK(code == 2);
  CHECK(read_file(out / "report.json").find("\"pass\": false") !=
        std::string::npos);
}

TEST_CASE("subcommand field must match the invocation") {
  const auto cfg = scratch() / "mismatch.json";
  const auto err = scratch() / "mismatch.err";
  write_file(cfg, R"({"subcommand":"clt","q":0.9,"T":50,"N":50,"seed":1})");
  CHECK(run("front-speed --config " + cfg.string(), err) == 1);
  CHECK(read_file(err).find("subcommand") != std::string::npos);
}
