#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "posiv/dataset_io.hpp"
#include "posiv/error.hpp"
#include "posiv/model_spec.hpp"
#include "posiv/pipeline.hpp"
#include "posiv/prepare.hpp"
#include "posiv/report.hpp"
#include "posiv/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using posiv::Error;
using posiv::ErrorCode;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
  std::string format = "text";
  int threads = 1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  out << text;
}

json load_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  try {
    auto j = json::parse(read_file(g.config));
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, g.config + ": " + e.what());
  }
}

posiv::SchemaMap schema_map_from(const json& config) {
  posiv::SchemaMap map;
  if (!config.contains("schema_map")) return map;
  const auto& m = config.at("schema_map");
  if (!m.is_object()) throw Error(ErrorCode::InvalidConfig, "schema_map must be an object");
  for (const auto& [key, value] : m.items()) {
    if (!value.is_string()) throw Error(ErrorCode::InvalidConfig, "schema_map values are column names");
    map[key] = value.get<std::string>();
  }
  return map;
}

posiv::Dataset load(const Globals& g, const std::string& path) {
  return posiv::load_dataset(path, schema_map_from(load_config(g)));
}

posiv::ModelSpec resolve_spec(const std::string& name_or_path) {
  for (const auto& s : posiv::builtin_specs()) {
    if (s.name == name_or_path) return s;
  }
  if (!fs::exists(name_or_path)) {
    throw Error(ErrorCode::InvalidSpec, "'" + name_or_path + "' is neither a builtin spec nor a file");
  }
  return posiv::parse_spec(read_file(name_or_path));
}

const char* column_label(posiv::Method m) { return m == posiv::Method::OLS ? "OLS" : "IV"; }

void warn(const posiv::FitResult& fit) {
  for (const auto& w : fit.warnings) std::cerr << "warning: " << fit.spec_name << ": " << w << '\n';
}

std::vector<std::uint64_t> choose_items(const posiv::Dataset& ds, const std::vector<std::string>& ids,
                                        std::size_t top_n) {
  std::vector<std::uint64_t> items;
  for (const auto& text : ids) {
    auto id = posiv::parse_id(text);
    if (!id) throw Error(ErrorCode::UnknownItem, "bad item id '" + text + "'");
    items.push_back(*id);
  }
  if (items.empty()) items = posiv::top_items(ds, top_n);
  return items;
}

int run_simulate(const Globals& g) {
  auto config = posiv::sim_config_from_json(load_config(g));
  if (g.seed) config.seed = *g.seed;
  if (g.threads > 1) config.threads = g.threads;
  auto [ds, truth] = posiv::simulate(config);
  const fs::path out(g.out);
  posiv::write_dataset(ds, out / "dataset.csv");
  write_file(out / "truth.json", posiv::truth_to_json(truth, config).dump(2) + "\n");
  std::cout << "wrote " << ds.size() << " rows to " << (out / "dataset.csv").string() << '\n';
  return 0;
}

struct PrepareArgs {
  std::string data;
  std::optional<std::uint64_t> sample_seed;
  std::string item;
  std::size_t top_n = 0;
  std::optional<std::int32_t> session_top_cut;
};

int run_prepare(const Globals& g, const PrepareArgs& a) {
  auto ds = load(g, a.data);
  if (!a.item.empty()) {
    auto id = posiv::parse_id(a.item);
    if (!id) throw Error(ErrorCode::UnknownItem, "bad item id '" + a.item + "'");
    ds = posiv::slice_by_item(ds, *id, a.sample_seed.value_or(g.seed.value_or(0)));
  } else {
    if (a.top_n > 0) {
      auto keep = posiv::top_items(ds, a.top_n);
      std::vector<posiv::EdgeObservation> rows;
      for (const auto& r : ds.rows()) {
        if (std::find(keep.begin(), keep.end(), r.item_id) != keep.end()) rows.push_back(r);
      }
      ds = ds.derive(std::move(rows), "top_n=" + std::to_string(a.top_n));
    }
    if (a.sample_seed) ds = posiv::sample_one_per_request(ds, *a.sample_seed);
  }
  const fs::path out(g.out);
  if (a.session_top_cut) {
    auto sessions = posiv::aggregate_sessions(ds, *a.session_top_cut);
    posiv::write_sessions(sessions, out / "sessions.csv");
    std::cout << "wrote " << sessions.rows.size() << " sessions\n";
  } else {
    posiv::write_dataset(ds, out / "prepared.csv");
    std::cout << "wrote " << ds.size() << " rows\n";
  }
  return 0;
}

struct EstimateArgs {
  std::string data;
  std::vector<std::string> specs;
  bool per_item = false;
  std::vector<std::string> items;
  std::size_t top_n = 5;
  std::optional<std::uint64_t> sample_seed;
  std::int32_t session_top_cut = 4;
};

int run_estimate(const Globals& g, const EstimateArgs& a) {
  auto ds = load(g, a.data);
  std::vector<posiv::ModelSpec> specs;
  for (const auto& s : a.specs) specs.push_back(resolve_spec(s));
  const fs::path out(g.out);

  if (a.per_item) {
    const auto items = choose_items(ds, a.items, a.top_n);
    const auto seed = a.sample_seed.value_or(g.seed.value_or(0));
    std::vector<posiv::report::EffectBar> bars;
    json fits = json::array();
    for (const auto& spec : specs) {
      for (const auto& item : posiv::estimate_per_item(ds, spec, items, seed, g.threads)) {
        warn(item.fit);
        bars.push_back({item.item_id, spec.name, posiv::position_coefficient(item.fit),
                        posiv::position_std_error(item.fit)});
        auto j = posiv::report::fit_to_json(item.fit);
        j["item_id"] = item.item_id;
        fits.push_back(std::move(j));
      }
    }
    const auto csv = posiv::report::effects_csv(bars);
    write_file(out / "effects.csv", csv);
    write_file(out / "item_fits.json", fits.dump(2) + "\n");
    std::cout << (g.format == "json" ? fits.dump(2) + "\n" : csv);
    return 0;
  }

  std::vector<posiv::report::TableColumn> columns;
  json fits = json::array();
  for (const auto& spec : specs) {
    auto fit = posiv::estimate(ds, spec, a.session_top_cut);
    warn(fit);
    fits.push_back(posiv::report::fit_to_json(fit));
    columns.push_back({std::move(fit), column_label(spec.method)});
  }
  // a table needs one dependent variable; group columns by outcome
  std::map<std::string, std::vector<posiv::report::TableColumn>> by_outcome;
  std::vector<std::string> order;
  for (auto& c : columns) {
    if (!by_outcome.contains(c.fit.outcome_name)) order.push_back(c.fit.outcome_name);
    by_outcome[c.fit.outcome_name].push_back(c);
  }
  std::string text;
  for (const auto& outcome : order) {
    if (!text.empty()) text += '\n';
    text += posiv::report::render_table(by_outcome[outcome]);
  }
  write_file(out / "estimate.txt", text);
  write_file(out / "estimate.json", fits.dump(2) + "\n");
  std::cout << (g.format == "json" ? fits.dump(2) + "\n" : text);
  return 0;
}

struct DiagnoseArgs {
  std::string data;
  std::string spec = "spec1";
  std::size_t top_n = 30;
  std::optional<std::uint64_t> sample_seed;
};

int run_diagnose(const Globals& g, const DiagnoseArgs& a) {
  auto ds = load(g, a.data);
  const auto spec = resolve_spec(a.spec);
  const auto items = posiv::top_items(ds, a.top_n);
  const auto seed = a.sample_seed.value_or(g.seed.value_or(0));
  std::vector<posiv::report::ForestRow> rows;
  for (const auto& item : posiv::first_stage_per_item(ds, spec, items, seed, g.threads)) {
    rows.push_back(posiv::report::forest_row(item.item_id, item.report.equations.front()));
  }
  const fs::path out(g.out);
  const auto csv = posiv::report::forest_csv(rows);
  write_file(out / "forest.svg", posiv::report::forest_svg(rows, "First stage by item"));
  write_file(out / "forest.csv", csv);
  if (g.format == "svg") {
    std::cout << posiv::report::forest_svg(rows, "First stage by item");
  } else {
    std::cout << csv;
  }
  return 0;
}

struct ReportArgs {
  std::string effects;
  int k1 = 1;
  int k2 = 2;
};

int run_report(const Globals& g, const ReportArgs& a) {
  const auto bars = posiv::report::read_effects_csv(read_file(a.effects));
  const fs::path out(g.out);
  write_file(out / "effects.svg", posiv::report::effects_svg(bars, "Position effect by item"));
  write_file(out / "effects.csv", posiv::report::effects_csv(bars));

  std::vector<std::string> specs;
  for (const auto& b : bars) {
    if (std::find(specs.begin(), specs.end(), b.spec) == specs.end()) specs.push_back(b.spec);
  }
  std::ostringstream summary;
  for (const auto& spec : specs) {
    std::vector<posiv::ItemFit> fits;
    for (const auto& b : bars) {
      if (b.spec != spec) continue;
      posiv::ItemFit f;
      f.item_id = b.item_id;
      f.fit.names = {"position"};
      f.fit.coefficients = Eigen::VectorXd::Constant(1, b.coefficient);
      f.fit.std_errors = Eigen::VectorXd::Constant(1, b.std_error);
      fits.push_back(std::move(f));
    }
    const auto effect = posiv::aggregate_effect(std::move(fits), a.k1, a.k2);
    summary << spec << ": tau_hat(" << a.k1 << "," << a.k2
            << ") = " << posiv::report::format_number(effect.tau_hat) << " (se "
            << (effect.se ? posiv::report::format_number(*effect.se) : std::string("n/a"))
            << ", items " << effect.n_items << ")\n";
  }
  write_file(out / "summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

int exit_code(ErrorCode code) { return posiv::is_input_error(code) ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Position effects from past A/B tests used as instruments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG / sampling seed");
  app.add_option("--config", g.config, "JSON config (SimConfig keys, schema_map)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "stdout format")
      ->check(CLI::IsMember({"text", "json", "csv", "svg"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 64));

  auto* simulate = app.add_subcommand("simulate", "simulate a marketplace with known effects");

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "sample, slice or aggregate a dataset");
  prepare->add_option("--data", prep.data, "edge-level CSV or JSON lines")->required();
  prepare->add_option("--sample-seed", prep.sample_seed, "keep one row per request");
  prepare->add_option("--item", prep.item, "keep one item (one row per request)");
  prepare->add_option("--top-n", prep.top_n, "keep the n most frequent items");
  prepare->add_option("--session-top-cut", prep.session_top_cut, "aggregate to sessions");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "fit one or more specs");
  estimate->add_option("--data", est.data)->required();
  estimate->add_option("--spec", est.specs, "builtin name or JSON file (repeatable)")->required();
  estimate->add_flag("--per-item", est.per_item, "fit each item separately");
  estimate->add_option("--item", est.items, "items for --per-item (repeatable)");
  estimate->add_option("--top-n", est.top_n, "items for --per-item when --item is absent")
      ->capture_default_str();
  estimate->add_option("--sample-seed", est.sample_seed);
  estimate->add_option("--session-top-cut", est.session_top_cut)->capture_default_str();

  DiagnoseArgs diag;
  auto* diagnose = app.add_subcommand("diagnose", "first-stage forest plot per item");
  diagnose->add_option("--data", diag.data)->required();
  diagnose->add_option("--spec", diag.spec)->capture_default_str();
  diagnose->add_option("--top-n", diag.top_n)->capture_default_str();
  diagnose->add_option("--sample-seed", diag.sample_seed);

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "effect bars and tau summary from effects.csv");
  report->add_option("--effects", rep.effects, "CSV with item_id,spec,coef,se")->required();
  report->add_option("--k1", rep.k1)->capture_default_str();
  report->add_option("--k2", rep.k2)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return run_simulate(g);
    if (*prepare) return run_prepare(g, prep);
    if (*estimate) return run_estimate(g, est);
    if (*diagnose) return run_diagnose(g, diag);
    if (*report) return run_report(g, rep);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
