#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "lca/cli.hpp"

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = lca::run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> base(const fixtures::TempDir& dir) {
  return {"--data", LCA_FIXTURE_DIR, "--out", dir.path().string(), "--seed", "7", "--epochs", "3",
          "--learning-rate", "0.02"};
}

std::vector<std::string> with(std::vector<std::string> args, std::initializer_list<std::string> more) {
  args.insert(args.end(), more);
  return args;
}

nlohmann::json load(const std::filesystem::path& p) { return nlohmann::json::parse(fixtures::read_file(p)); }

}  // namespace

TEST_CASE("cli pipeline writes the report bundle") {
  fixtures::TempDir dir;
  const Result r = run(with(base(dir), {"--lambda1", "0.001", "--lambda2", "0", "--timestamp", "T", "pipeline"}));
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* f : {"run.json", "tables.txt", "probe.json", "ranking.json", "selection.json", "ranking.csv"})
    CHECK(std::filesystem::exists(dir / f));
  const auto j = load(dir / "run.json");
  CHECK(j["seed"] == 7);
  CHECK(j["generated_at"] == "T");

  SUBCASE("follow-up commands reuse the artifacts") {
    CHECK(run(with(base(dir), {"rank"})).code == 0);
    CHECK(run(with(base(dir), {"layers"})).code == 0);
    CHECK(run(with(base(dir), {"spread", "--percent", "50"})).code == 0);
    CHECK(run(with(base(dir), {"top-words", "--neuron", "0", "--k", "3"})).code == 0);
    const Result vis = run(with(base(dir), {"visualize", "--neuron", "1", "--sentences", "0,1"}));
    CHECK(vis.code == 0);
    CHECK(std::filesystem::exists(dir / "neuron_0_1.html"));
    CHECK(run(with(base(dir), {"compare", "--base", dir.path().string(), "--other", dir.path().string()})).code == 0);
  }
  SUBCASE("mask ablation leaves the probe untouched") {
    const std::string before = fixtures::read_file(dir / "probe.json");
    REQUIRE(run(with(base(dir), {"ablate", "--strategy", "top", "--percent", "20"})).code == 0);
    CHECK(std::filesystem::exists(dir / "ablate_top.json"));
    CHECK(fixtures::read_file(dir / "probe.json") == before);
  }
  SUBCASE("retrained ablation") {
    REQUIRE(run(with(base(dir), {"ablate", "--strategy", "random", "--percent", "10", "--retrain"})).code == 0);
    const auto a = load(dir / "ablate_random.json");
    CHECK(a.dump().find("random") != std::string::npos);
  }
}

TEST_CASE("options are accepted after the subcommand") {
  fixtures::TempDir dir;
  const Result r = run({"train", "--data", LCA_FIXTURE_DIR, "--out", dir.path().string(), "--epochs", "2"});
  INFO(r.err);
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(dir / "probe.json"));
}

TEST_CASE("rank without a probe is a validation error") {
  fixtures::TempDir dir;
  const Result r = run(with(base(dir), {"rank"}));
  CHECK(r.code == 1);
  CHECK(r.err.find("MissingProbe") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"no-such-command"}).code == 1);
  CHECK(run({"ablate", "--strategy", "sideways", "--percent", "10"}).code == 1);
  fixtures::TempDir dir;
  CHECK(run({"train", "--data", (dir / "missing").string()}).code == 1);
}

TEST_CASE("help exits with 0") {
  const Result r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("pipeline") != std::string::npos);
}

TEST_CASE("runtime failures exit with 2") {
  fixtures::TempDir dir;
  fixtures::write_file(dir / "blocker", "x");
  const Result r = run({"--data", LCA_FIXTURE_DIR, "--out", (dir / "blocker").string(), "--epochs", "1", "train"});
  CHECK(r.code == 2);
}

TEST_CASE("config file values yield to flags") {
  fixtures::TempDir dir;
  fixtures::write_file(dir / "cfg.ini", "seed=11\nepochs=1\nout=" + (dir / "from_config").string() + "\n");
  const Result r = run({"--config", (dir / "cfg.ini").string(), "--data", LCA_FIXTURE_DIR, "--seed", "12", "train"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto probe = load(dir / "from_config" / "probe.json");
  CHECK(probe.dump().find("\"seed\":12") != std::string::npos);
  CHECK(probe.dump().find("\"epochs\":1") != std::string::npos);
}

TEST_CASE("seed can come from the environment") {
  fixtures::TempDir dir;
  ::setenv("NEURON_LCA_SEED", "19", 1);
  const Result r = run({"--data", LCA_FIXTURE_DIR, "--out", dir.path().string(), "--epochs", "1", "train"});
  ::unsetenv("NEURON_LCA_SEED");
  REQUIRE(r.code == 0);
  CHECK(load(dir / "probe.json").dump().find("\"seed\":19") != std::string::npos);
}

TEST_CASE("synth writes a loadable corpus") {
  fixtures::TempDir dir;
  const Result r = run({"--seed", "2", "synth", "--layers", "2", "--hidden", "5", "--signals", "2", "--train-tokens",
                        "200", "--dev-tokens", "50", "--test-tokens", "50", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "planted.json"));
  CHECK(run({"--data", dir.path().string(), "--out", (dir / "o").string(), "--epochs", "1", "train"}).code == 0);
}
