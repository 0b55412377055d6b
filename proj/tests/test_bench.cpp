#include "specplan/bench/commands.hpp"
#include "specplan/core/errors.hpp"

#include "support/traces.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace specplan;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("specplan-bench-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json small_config() {
  return {{"seed", 3},
          {"workload", {{"generator", {{"seed", 5}, {"n_tasks", 24}}}}},
          {"predictor", {{"batch", 4}}},
          {"policies",
           {{{"kind", "sequential"}},
            {{"kind", "fixed"}, {"k", 2}},
            {{"kind", "fixed"}, {"k", 4}},
            {{"kind", "dynamic"}, {"tau", 0.8}},
            {{"kind", "dynamic_offset"}, {"beta", 1}},
            {{"kind", "sft"}},
            {{"kind", "bo"}}}}};
}

}  // namespace

TEST_CASE("config names policies by role and merges predictor settings") {
  const auto cfg = bench::parse_config(small_config());
  REQUIRE(cfg.policies.size() == 7);
  CHECK(cfg.policies[0].name == "sequential");
  CHECK(cfg.policies[1].name == "fixed-k2");
  CHECK(cfg.policies[3].name == "dsp-tau0.8");
  CHECK(cfg.policies[3].hyper.tau == 0.8);
  CHECK(cfg.policies[3].hyper.batch == 4);
  CHECK(cfg.policies[3].hyper.seed == 3);
  CHECK(cfg.policies[4].name == "dsp-offset1");
  CHECK(cfg.policies[4].hyper.tau == 0.5);
  CHECK(cfg.policies[4].hyper.beta == 1);
  CHECK(cfg.policies[5].hyper.lambda == 1.0);
  CHECK(cfg.policies[5].hyper.gamma == 1.0);
  CHECK(cfg.policies[6].k_max == 6);
  CHECK(cfg.policies[6].epsilon == doctest::Approx(0.1));
}

TEST_CASE("config errors") {
  auto doc = small_config();
  doc["policies"] = nlohmann::json::array();
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);
  doc = small_config();
  doc["policies"].push_back({{"kind", "fixed"}, {"k", 2}});
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);  // duplicate name
  doc = small_config();
  doc["policies"][1]["kind"] = "magic";
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);
  doc = small_config();
  doc["policies"][3]["learning_rate"] = 0.1;
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);
  doc = small_config();
  doc.erase("workload");
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);
  doc = small_config();
  doc["mode"] = "live";
  CHECK_THROWS_AS(bench::parse_config(doc), ConfigError);
  CHECK_THROWS_AS(bench::load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("overrides address nested keys and array items") {
  auto doc = small_config();
  bench::apply_overrides(doc, {"seed=9", "workload.generator.n_tasks=7", "policies.1.k=3", "reference=fixed-k3"});
  CHECK(doc["seed"] == 9);
  CHECK(doc["workload"]["generator"]["n_tasks"] == 7);
  CHECK(doc["policies"][1]["k"] == 3);
  CHECK(doc["reference"] == "fixed-k3");
  const auto cfg = bench::parse_config(doc);
  CHECK(cfg.policies[1].name == "fixed-k3");
  CHECK_THROWS_AS(bench::apply_overrides(doc, {"novalue"}), ConfigError);
  CHECK_THROWS_AS(bench::apply_overrides(doc, {"a..b=1"}), ConfigError);
}

TEST_CASE("gen writes one trace per task and a manifest") {
  const auto dir = fresh_dir("gen");
  auto cfg = bench::parse_config(small_config());
  const auto stats = bench::cmd_gen(cfg, dir / "w");
  CHECK(stats.tasks == 24);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "w" / "traces")) files += e.path().extension() == ".json";
  CHECK(files == 24);
  const auto loaded = bench::load_workload(dir / "w");
  CHECK(nlohmann::json(loaded) == nlohmann::json(agents::generate_tasks(*cfg.generator)));

  // a config pointing at the directory runs on the same tasks
  std::ofstream(dir / "c.json") << nlohmann::json{{"workload", {{"traces", "w"}}},
                                                  {"policies", {{{"kind", "fixed"}, {"k", 2}}}}}
                                       .dump();
  const auto from_dir = bench::load_config(dir / "c.json");
  CHECK(nlohmann::json(bench::workload_of(from_dir)) == nlohmann::json(loaded));
}

TEST_CASE("run is byte-identical across repeats and the report is self-consistent") {
  const auto dir = fresh_dir("run");
  const auto cfg = bench::parse_config(small_config());
  bench::cmd_run(cfg, dir / "a");
  bench::cmd_run(cfg, dir / "b");
  bench::cmd_report(dir / "a", "fixed-k2", dir / "a" / "report.csv");
  bench::cmd_report(dir / "b", "fixed-k2", dir / "b" / "report.csv");
  for (const auto& s : cfg.policies) {
    for (const auto& f : {"ledger-" + s.name + ".jsonl", "rounds-" + s.name + ".jsonl"}) {
      CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
    }
  }
  for (const char* f : {"report.csv", "breakdown.csv", "scatter.csv", "accuracy.csv", "baseline.jsonl", "manifest.json",
                        "checkpoints/dsp-tau0.8.json", "checkpoints/sft-buffer.jsonl"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }

  std::ifstream in(dir / "a" / "ledger-sequential.jsonl");
  const auto seq = read_ledger(in);
  for (const auto& r : seq) CHECK(r.role == Role::target);
  const auto reports = bench::cmd_report(dir / "a", "sequential", dir / "a" / "self.csv");
  CHECK(reports[0].policy == "sequential");
  CHECK(reports[0].concurrency.mc_bar == doctest::Approx(1.0));
  CHECK(reports[0].vs_reference.time == doctest::Approx(1.0));
  CHECK(reports[0].vs_reference.cost == doctest::Approx(1.0));
  CHECK(reports[0].delta_t == doctest::Approx(0.0));

  const auto accuracy = slurp(dir / "a" / "accuracy.csv");
  CHECK(accuracy.find("sequential,") == std::string::npos);  // no round can be scored
  CHECK(accuracy.find("dsp-tau0.8,1,1,24,") != std::string::npos);

  const auto scatter = slurp(dir / "a" / "scatter.csv");
  CHECK(std::count(scatter.begin(), scatter.end(), '\n') == 1 + static_cast<long>(cfg.policies.size()));
}

TEST_CASE("fixed k=2 on all-match tasks is the unit row of the report") {
  const auto dir = fresh_dir("unit");
  fs::create_directories(dir / "w" / "traces");
  nlohmann::json ids = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    auto t = testutil::all_match(10 + i, 3, 20, 2);
    t.task_id = "task-" + std::to_string(i);
    agents::save_trace(t, dir / "w" / "traces" / (t.task_id + ".json"));
    ids.push_back(t.task_id);
  }
  std::ofstream(dir / "w" / "manifest.json") << nlohmann::json{{"tasks", ids}}.dump();
  const auto cfg = bench::parse_config({{"workload", {{"traces", (dir / "w").string()}}},
                                        {"policies", {{{"kind", "fixed"}, {"k", 2}}, {{"kind", "fixed"}, {"k", 4}}}}});
  bench::cmd_run(cfg, dir / "r");
  bench::cmd_report(dir / "r", "fixed-k2", dir / "r" / "report.csv");
  std::istringstream csv(slurp(dir / "r" / "report.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(row.substr(row.find(",1.0000")) == ",1.0000,1.0000,1.0000,1.0000,3.0000,2.0000");
}

TEST_CASE("report errors name what is missing") {
  const auto dir = fresh_dir("missing");
  CHECK_THROWS_AS(bench::cmd_report(dir, "fixed-k2", dir / "r.csv"), MissingRun);
  const auto cfg = bench::parse_config(small_config());
  bench::cmd_run(cfg, dir / "r");
  CHECK_THROWS_AS(bench::cmd_report(dir / "r", "fixed-k9", dir / "r.csv"), MissingRun);
  fs::remove(dir / "r" / "rounds-bo.jsonl");
  CHECK_THROWS_AS(bench::cmd_report(dir / "r", "fixed-k2", dir / "r.csv"), MissingRun);
}

TEST_CASE("accuracy windows") {
  const auto w = bench::windowed({1.0, 0.0, std::nullopt, 0.5, std::nullopt}, 2);
  REQUIRE(w.size() == 3);
  CHECK(w[0]->first == doctest::Approx(0.5));
  CHECK(w[0]->second == doctest::Approx(0.5));
  CHECK(w[1]->first == doctest::Approx(0.5));
  CHECK(w[1]->second == doctest::Approx(0.0));
  CHECK_FALSE(w[2]);
}

TEST_CASE("shipped configs load") {
  const fs::path dir = fs::path(SPECPLAN_SOURCE_DIR) / "configs";
  const auto sim = bench::load_config(dir / "default.json");
  CHECK(sim.policies.size() == 12);
  CHECK(sim.reference == "fixed-k2");
  const auto live = bench::load_config(dir / "live.example.json");
  REQUIRE(live.live);
  CHECK(fs::exists(live.live->approx_template));
  CHECK(fs::exists(live.live->target_template));
}
