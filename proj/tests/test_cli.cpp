#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hycone/cli.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream buf;
  std::streambuf* old = std::cout.rdbuf(buf.rdbuf());
  CliResult r;
  try {
    r.code = hycone::cli::run(args);
  } catch (...) {
    std::cout.rdbuf(old);
    throw;
  }
  std::cout.rdbuf(old);
  r.out = buf.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One generated dataset and one short training run shared by the tests.
struct Fixture {
  fs::path dir = fs::temp_directory_path() / "hycone_cli_fixture";
  fs::path data = dir / "data.jsonl";
  fs::path tax = dir / "data.jsonl.taxonomy.tsv";
  fs::path run_dir = dir / "run";
  fs::path ckpt = run_dir / "ckpt_step4.hycn";
  json train_json;

  Fixture() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    CliResult gen = run_cli({"gen-data", "--out", data.string(), "--depth", "2",
                             "--branching", "2", "--feature-dim", "6",
                             "--samples-per-leaf", "3", "--seed", "5"});
    REQUIRE(gen.code == 0);
    CliResult tr = run_cli({"train", "--data", data.string(), "--out",
                            run_dir.string(), "--steps", "4", "--warmup", "1",
                            "--batch-size", "4", "--hidden", "8", "--embed-dim",
                            "4", "--eval-every", "1", "--checkpoint-every", "0",
                            "--seed", "3"});
    REQUIRE(tr.code == 0);
    train_json = json::parse(tr.out);
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("help exits cleanly and lists the subcommands") {
  CliResult r = run_cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("gen-data") != std::string::npos);
  CHECK(r.out.find("train") != std::string::npos);
  CHECK(r.out.find("interpolate") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli({"train", "--bogus-flag"}).code == 1);
  CHECK(run_cli({"no-such-command"}).code == 1);
  CHECK(run_cli({"gen-data"}).code == 1);  // --out is required
}

TEST_CASE("gen-data is deterministic across invocations") {
  fs::path dir = fs::temp_directory_path() / "hycone_cli_gen";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> base = {"gen-data", "--depth", "2", "--branching",
                                   "2", "--feature-dim", "5",
                                   "--samples-per-leaf", "2", "--seed", "9"};
  auto with_out = [&](const std::string& name) {
    std::vector<std::string> args = base;
    args.push_back("--out");
    args.push_back((dir / name).string());
    return args;
  };
  REQUIRE(run_cli(with_out("a.jsonl")).code == 0);
  REQUIRE(run_cli(with_out("b.jsonl")).code == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.jsonl.taxonomy.tsv") ==
        slurp(dir / "b.jsonl.taxonomy.tsv"));
  fs::remove_all(dir);
}

TEST_CASE("gen-data output reports the plan and the files") {
  Fixture& f = fx();
  CHECK(fs::exists(f.data));
  CHECK(fs::exists(f.tax));
  // 2 levels of branching 2 -> 4 leaves, 3 samples each.
  CliResult r = run_cli({"gen-data", "--out",
                         (f.dir / "plan_check.jsonl").string(), "--depth", "2",
                         "--branching", "2", "--feature-dim", "6",
                         "--samples-per-leaf", "3", "--seed", "5"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["items"] == 12);
  CHECK(j["leaves"] == 4);
  CHECK(j["config"]["seed"] == 5);
  CHECK(j["config"].contains("instance_scale"));
}

TEST_CASE("train reports progress and writes run files") {
  Fixture& f = fx();
  const json& j = f.train_json;
  CHECK(j["steps_completed"] == 4);
  CHECK(j["final"]["step"] == 4);
  CHECK(j["final"]["total"].is_number());
  CHECK(j["config"]["seed"] == 3);
  CHECK(j["config"]["feature_dim"] == 6);
  CHECK(j["rejected_no_boxes"] == 0);

  CHECK(fs::exists(f.run_dir / "config.json"));
  CHECK(fs::exists(f.run_dir / "metrics.jsonl"));
  CHECK(fs::exists(f.ckpt));
  CHECK(fs::exists(f.run_dir / "best.hycn"));
}

TEST_CASE("ablating a term changes the loss stream") {
  Fixture& f = fx();
  fs::path base_dir = f.dir / "ab_base";
  fs::path abl_dir = f.dir / "ab_cut";
  std::vector<std::string> common = {
      "train",        "--data", f.data.string(), "--steps",    "3",
      "--warmup",     "1",      "--batch-size",  "4",          "--hidden",
      "8",            "--embed-dim", "4",        "--eval-every", "1",
      "--checkpoint-every", "0", "--seed", "3"};
  std::vector<std::string> base = common;
  base.push_back("--out");
  base.push_back(base_dir.string());
  std::vector<std::string> abl = common;
  abl.push_back("--out");
  abl.push_back(abl_dir.string());
  abl.push_back("--ablate-term");
  abl.push_back("cont_IboxT");
  REQUIRE(run_cli(base).code == 0);
  REQUIRE(run_cli(abl).code == 0);
  CHECK(slurp(base_dir / "metrics.jsonl") != slurp(abl_dir / "metrics.jsonl"));

  std::vector<std::string> bad = common;
  bad.push_back("--out");
  bad.push_back((f.dir / "ab_bad").string());
  bad.push_back("--ablate-term");
  bad.push_back("cont_nonsense");
  CHECK(run_cli(bad).code == 1);
}

TEST_CASE("config files fill in only what flags leave unset") {
  Fixture& f = fx();
  fs::path cfg_file = f.dir / "train_cfg.json";
  {
    std::ofstream out(cfg_file);
    out << R"({"gamma": 0.3, "total_steps": 5, "batch_size": 4})";
  }
  CliResult r = run_cli({"train", "--data", f.data.string(), "--out",
                         (f.dir / "cfg_run").string(), "--config",
                         cfg_file.string(), "--gamma", "0.25", "--warmup", "1",
                         "--hidden", "8", "--embed-dim", "4", "--eval-every",
                         "0", "--checkpoint-every", "0", "--seed", "3"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["config"]["gamma"] == 0.25);     // flag beats file
  CHECK(j["config"]["total_steps"] == 5);  // file beats default
  CHECK(j["steps_completed"] == 5);
}

TEST_CASE("data errors exit with code 2") {
  Fixture& f = fx();
  CHECK(run_cli({"train", "--data", (f.dir / "missing.jsonl").string(),
                 "--out", (f.dir / "never").string()})
            .code == 2);

  fs::path corrupt = f.dir / "corrupt.jsonl";
  {
    std::ofstream out(corrupt);
    out << "this is not json\n";
  }
  CHECK(run_cli({"train", "--data", corrupt.string(), "--out",
                 (f.dir / "never2").string()})
            .code == 2);
}

TEST_CASE("kappa accepts learnable or fixed:<value>") {
  Fixture& f = fx();
  CliResult r = run_cli({"train", "--data", f.data.string(), "--out",
                         (f.dir / "kap_run").string(), "--steps", "2",
                         "--warmup", "1", "--batch-size", "4", "--hidden", "8",
                         "--embed-dim", "4", "--eval-every", "0",
                         "--checkpoint-every", "0", "--kappa", "fixed:0.5"});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["config"]["kappa_init"] == 0.5);
  CHECK(j["config"]["kappa_learnable"] == false);

  CHECK(run_cli({"train", "--data", f.data.string(), "--out",
                 (f.dir / "kap_bad").string(), "--kappa", "sideways"})
            .code == 1);
}

TEST_CASE("grad-check reports and gates on the audit") {
  CliResult ok = run_cli({"grad-check", "--feature-dim", "5", "--batch", "3",
                          "--hidden", "6", "--embed-dim", "4"});
  CHECK(ok.code == 0);
  json j = json::parse(ok.out);
  CHECK(j["pass"] == true);
  CHECK(j["max_rel_err"].get<double>() < 1e-3);
  CHECK(j["checked"].get<int>() > 0);

  CliResult fail = run_cli({"grad-check", "--feature-dim", "5", "--batch", "3",
                            "--hidden", "6", "--embed-dim", "4", "--tolerance",
                            "1e-18"});
  CHECK(fail.code == 3);
  CHECK(json::parse(fail.out)["pass"] == false);
}

TEST_CASE("stats streams histograms as annotated csv") {
  Fixture& f = fx();
  CliResult r = run_cli({"stats", "--data", f.data.string(), "--bins", "4"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# box_ratio_histogram", 0) == 0);
  CHECK(r.out.find("lo,hi,count") != std::string::npos);
  CHECK(r.out.find("# radius_histogram") == std::string::npos);

  CliResult withckpt = run_cli({"stats", "--data", f.data.string(), "--ckpt",
                                f.ckpt.string(), "--bins", "4"});
  REQUIRE(withckpt.code == 0);
  CHECK(withckpt.out.find("# radius_histogram") != std::string::npos);
  CHECK(withckpt.out.find("role,lo,hi,count") != std::string::npos);

  fs::path stats_dir = f.dir / "stats_out";
  CliResult todir = run_cli({"stats", "--data", f.data.string(), "--ckpt",
                             f.ckpt.string(), "--out", stats_dir.string()});
  REQUIRE(todir.code == 0);
  CHECK(fs::exists(stats_dir / "ratio_hist.csv"));
  CHECK(fs::exists(stats_dir / "radius_hist.csv"));
  json j = json::parse(todir.out);
  CHECK(j["ratio"]["mean"].is_number());
  CHECK(j["radius"]["mean_img"].is_number());
}

TEST_CASE("interpolate needs exactly one target") {
  Fixture& f = fx();
  std::vector<std::string> none = {"interpolate", "--ckpt", f.ckpt.string(),
                                   "--data", f.data.string(), "--from", "0"};
  CHECK(run_cli(none).code == 1);

  std::vector<std::string> both = none;
  both.insert(both.end(), {"--to", "3", "--to-root"});
  CHECK(run_cli(both).code == 1);

  std::vector<std::string> to_root = none;
  to_root.push_back("--to-root");
  CliResult r = run_cli(to_root);
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  REQUIRE(j["points"].is_array());
  REQUIRE(!j["points"].empty());
  for (const auto& p : j["points"]) {
    CHECK(p.contains("t"));
    CHECK(p.contains("id"));
    CHECK(p.contains("label"));
    CHECK(p.contains("distance"));
  }

  std::vector<std::string> to_item = none;
  to_item.insert(to_item.end(), {"--to", "5", "--n", "6"});
  CHECK(run_cli(to_item).code == 0);

  std::vector<std::string> bad_id = none;
  bad_id.insert(bad_id.end(), {"--to", "99999"});
  CHECK(run_cli(bad_id).code == 2);
}

TEST_CASE("zero-shot evaluation reports accuracy over the leaf classes") {
  Fixture& f = fx();
  CliResult r = run_cli({"eval-zeroshot", "--ckpt", f.ckpt.string(), "--data",
                         f.data.string()});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["n"] == 12);
  double acc = j["accuracy"].get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);

  CHECK(run_cli({"eval-zeroshot", "--ckpt", f.ckpt.string(), "--data",
                 f.data.string(), "--classes", "root.7.7"})
            .code == 2);
}

TEST_CASE("hierarchical evaluation averages the tree metrics") {
  Fixture& f = fx();
  CliResult r = run_cli({"eval-hier", "--ckpt", f.ckpt.string(), "--data",
                         f.data.string(), "--taxonomy", f.tax.string()});
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["n"] == 12);
  CHECK(j["classes"] == 4);
  for (const char* key : {"accuracy", "tie", "lca", "jaccard", "p_h", "r_h"}) {
    CHECK(j[key].is_number());
  }
  CHECK(j["tie"].get<double>() >= 0.0);
  CHECK(j["accuracy"].get<double>() <= 1.0);
}
