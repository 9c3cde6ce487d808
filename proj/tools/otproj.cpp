// Command-line surface: shadow / entropic-shadow projection of coupled CSV
// data onto decoupled marginal CSVs, cross-validation for eta, confidence
// intervals, pairwise OT, and the simulation drivers.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "otproj/otproj.hpp"

using json = nlohmann::json;
using namespace otproj;

namespace {

Functional parse_functional(const std::string& spec,
                            const std::vector<ColumnSchema>& schema) {
  auto coord_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < schema.size(); ++i)
      if (schema[i].name == name) return i;
    // Bare integer means a 0-based coordinate index.
    char* end = nullptr;
    const long v = std::strtol(name.c_str(), &end, 10);
    if (end != name.c_str() && *end == '\0' && v >= 0 &&
        static_cast<std::size_t>(v) < schema.size())
      return static_cast<std::size_t>(v);
    throw std::runtime_error("functional: unknown coordinate '" + name + "'");
  };
  auto parse_event = [&](const std::string& s) {
    Functional::Event ev;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("functional: expected name=value in '" + item + "'");
      ev.push_back({coord_index(item.substr(0, eq)), std::stod(item.substr(eq + 1))});
    }
    return ev;
  };

  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error("functional: expected kind:args");
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);
  if (kind == "cov") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw std::runtime_error("cov: expected two coordinates");
    return Functional::covariance(coord_index(args.substr(0, comma)),
                                  coord_index(args.substr(comma + 1)));
  }
  if (kind == "cdf") {
    Point t;
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) t.push_back(std::stod(item));
    if (t.size() != schema.size()) throw std::runtime_error("cdf: one threshold per column");
    return Functional::cdf(std::move(t));
  }
  if (kind == "condprob") {
    const auto bar = args.find('|');
    if (bar == std::string::npos)
      throw std::runtime_error("condprob: expected target|conditioning");
    return Functional::conditional_prob(parse_event(args.substr(0, bar)),
                                        parse_event(args.substr(bar + 1)));
  }
  if (kind == "prob") return Functional::event_prob(parse_event(args));
  throw std::runtime_error("functional: unknown kind '" + kind + "'");
}

std::vector<std::string> coordinate_names(const std::vector<ColumnSchema>& schema) {
  std::vector<std::string> names;
  for (const auto& c : schema) names.push_back(c.name);
  return names;
}

json projection_report(const ProjectionResult& proj, const std::string& mode) {
  json j{{"schema", kReportSchema},
         {"mode", mode},
         {"value", proj.value()},
         {"coupled_atoms", proj.coupled().size()}};
  if (proj.mode() == ProjectionMode::Entropic) j["eta"] = proj.eta();
  return j;
}

json table1_to_json(const Table1Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json jr{{"rho", row.rho},
            {"n_over_m", row.ratio},
            {"m", row.m},
            {"replications", row.replications},
            {"avg_log2_eta_cv", row.avg_log2_eta_cv}};
    for (const auto& [label, v] : row.rmse_cov) jr["rmse_cov"][label] = v;
    for (const auto& [label, v] : row.rmse_cdf) jr["rmse_cdf"][label] = v;
    rows.push_back(jr);
  }
  return json{{"schema", kReportSchema}, {"table", "gaussian"},   {"seed", r.seed},
              {"rows", rows},            {"wall_seconds", r.wall_seconds}};
}

json table3_to_json(const Table3Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back(json{
        {"m", row.m},
        {"n", row.n},
        {"replications", row.replications},
        {"bias", {{"tilde", row.bias_tilde}, {"hat", row.bias_hat}}},
        {"rmse", {{"tilde", row.rmse_tilde}, {"hat", row.rmse_hat}}},
        {"coverage",
         {{"tilde_boot", row.tilde_boot.coverage},
          {"hat_boot", row.hat_boot.coverage},
          {"hat_subsample", row.hat_subsample.coverage},
          {"hat_liu", row.hat_liu.coverage}}},
        {"ci_length",
         {{"tilde_boot", row.tilde_boot.avg_length},
          {"hat_boot", row.hat_boot.avg_length},
          {"hat_subsample", row.hat_subsample.avg_length},
          {"hat_liu", row.hat_liu.avg_length}}}});
  }
  return json{{"schema", kReportSchema}, {"table", "discrete"},    {"seed", r.seed},
              {"rows", rows},            {"wall_seconds", r.wall_seconds}};
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << j.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint-distribution reconstruction from coupled and marginal data"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::size_t threads = 0;
  double p = 2.0;
  double prune = 0.0;
  std::string report_path;
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--threads", threads, "worker threads (0: auto, env OTPROJ_THREADS)");
  app.add_option("--p", p, "Wasserstein exponent p >= 1");
  app.add_option("--prune", prune, "weight floor applied when exporting couplings");
  app.add_option("--report", report_path, "write the JSON report here instead of stdout");

  std::string coupled_path, schema_spec, out_file, functional_spec, method;
  std::vector<std::string> marginal_paths;
  double eta = 0.0625;
  double alpha = 0.05;
  std::size_t boot_b = 1000, sub_b = 0, sub_reps = 500, liu_draws = 2000;

  auto add_data_opts = [&](CLI::App* cmd, bool need_marginals) {
    cmd->add_option("--coupled", coupled_path, "coupled CSV (one column per coordinate)")
        ->required();
    if (need_marginals)
      cmd->add_option("--marginals", marginal_paths,
                      "one single-column CSV per coordinate")
          ->required();
    cmd->add_option("--schema", schema_spec,
                    "per-column types, e.g. z1:categorical,z2:ordinal")
        ->required();
  };

  CLI::App* project = app.add_subcommand("project", "exact shadow projection");
  add_data_opts(project, true);
  project->add_option("--out-file", out_file, "coupling CSV output path");

  CLI::App* eproject = app.add_subcommand("eproject", "entropic shadow projection");
  add_data_opts(eproject, true);
  eproject->add_option("--eta", eta, "entropic parameter")->required();
  eproject->add_option("--out-file", out_file, "coupling CSV output path");

  CLI::App* cveta = app.add_subcommand("cv-eta", "cross-validate the entropic parameter");
  add_data_opts(cveta, false);
  std::vector<double> cv_etas;
  std::size_t cv_folds = 5, cv_reps = 10;
  cveta->add_option("--etas", cv_etas, "candidate etas (default 2^0..2^-6)");
  cveta->add_option("--folds", cv_folds, "folds");
  cveta->add_option("--reps", cv_reps, "repetitions");

  CLI::App* infer = app.add_subcommand("infer", "confidence interval for a functional");
  add_data_opts(infer, true);
  infer->add_option("--method", method, "liu | subsample | bootstrap")->required();
  infer->add_option("--functional", functional_spec,
                    "cov:i,j | cdf:t1,..,tK | condprob:tgt|cond | prob:ev")
      ->required();
  infer->add_option("--alpha", alpha, "1 - confidence level");
  infer->add_option("--B", boot_b, "bootstrap resamples");
  infer->add_option("--b", sub_b, "subsample size (0: m^(2/3))");
  infer->add_option("--sub-reps", sub_reps, "subsampling resamples");
  infer->add_option("--draws", liu_draws, "Monte Carlo draws inside G_alpha");

  CLI::App* simulate = app.add_subcommand("simulate", "reproduce the simulation studies");
  int table = 1;
  std::size_t sim_m = 0, sim_n = 0, sim_reps = 0;
  bool paper_scale = false;
  simulate->add_option("--table", table, "1 (covariance), 2 (cdf), 3 (finite support)")
      ->required();
  simulate->add_option("--m", sim_m, "restrict to a single coupled size");
  simulate->add_option("--n", sim_n, "decoupled size for table 3");
  simulate->add_option("--reps", sim_reps, "replications per cell");
  simulate->add_flag("--paper-scale", paper_scale,
                     "full replication counts and n=10^6 for table 3");

  CLI::App* ot = app.add_subcommand("ot", "exact W_p between two sample files");
  std::string file_a, file_b, ot_metric = "continuous";
  ot->add_option("file_a", file_a)->required();
  ot->add_option("file_b", file_b)->required();
  ot->add_option("--metric", ot_metric, "continuous | ordinal | categorical");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*project || *eproject) {
      const auto schema = parse_schema(schema_spec);
      IngestResult in = ingest(coupled_path, marginal_paths, schema);
      const CostSpec cost = cost_from_schema(schema, p);
      const JointMeasure coupled = in.data.coupled_measure();
      const MarginalSystem marginals = in.data.marginal_system();
      ProjectionResult proj =
          *project ? shadow_project(coupled, marginals, cost)
                   : entropic_shadow_project(coupled, marginals, cost, eta);
      json rep = projection_report(proj, *project ? "exact" : "entropic");
      rep["coupled_rows"] = in.coupled_rows;
      if (!out_file.empty()) {
        const JointMeasure estimate = proj.materialize(prune);
        write_coupling_csv(out_file, estimate, coordinate_names(schema));
        rep["estimate_atoms"] = estimate.size();
        rep["out_file"] = out_file;
      }
      emit(rep, report_path);
    } else if (*cveta) {
      const auto schema = parse_schema(schema_spec);
      detail::Csv csv = detail::read_csv(coupled_path);
      if (csv.header.size() != schema.size())
        throw std::runtime_error("schema column count mismatch");
      const CostSpec cost = cost_from_schema(schema, p);
      CvConfig cfg;
      cfg.etas = cv_etas;
      if (cfg.etas.empty())
        for (int e = 0; e >= -6; --e) cfg.etas.push_back(std::pow(2.0, e));
      cfg.folds = cv_folds;
      cfg.reps = cv_reps;
      cfg.seed = seed;
      CvResult res = cv_select_eta(csv.rows, cost, cfg);
      emit(json{{"schema", kReportSchema},
                {"eta_cv", res.eta_cv},
                {"log2_eta_cv", std::log2(res.eta_cv)},
                {"etas", res.etas},
                {"avg_costs", res.avg_costs},
                {"seed", seed}},
           report_path);
    } else if (*infer) {
      const auto schema = parse_schema(schema_spec);
      IngestResult in = ingest(coupled_path, marginal_paths, schema);
      const CostSpec cost = cost_from_schema(schema, p);
      const Functional f = parse_functional(functional_spec, schema);
      const JointMeasure coupled = in.data.coupled_measure();
      const MarginalSystem marginals = in.data.marginal_system();
      const EstimatorPipeline pipeline = [&](const DataSet& d) {
        const JointMeasure c = d.coupled_measure();
        const MarginalSystem ms = d.marginal_system();
        const FiniteLP lp = build_lp(c, ms, cost);
        const LpSolution sol = solve_lp(lp);
        return f.value(lp.x_atoms(), lp.x_pushforward(sol.gamma));
      };
      IntervalResult r;
      if (method == "bootstrap") {
        BootstrapConfig bc;
        bc.resamples = boot_b;
        bc.alpha = alpha;
        bc.seed = seed;
        r = bootstrap_ci(pipeline, in.data, bc);
      } else if (method == "subsample") {
        SubsamplingConfig sc;
        sc.subsample_size = sub_b;
        sc.resamples = sub_reps;
        sc.alpha = alpha;
        sc.seed = seed;
        r = subsampling_ci(pipeline, in.data, sc);
      } else if (method == "liu") {
        const FiniteLP lp = build_lp(coupled, marginals, cost);
        const LpSolution sol = solve_lp(lp);
        double n_min = static_cast<double>(in.data.n(0));
        for (std::size_t c = 0; c < in.data.marginals.size(); ++c)
          n_min = std::min(n_min, static_cast<double>(in.data.n(c)));
        const LimitGaussianSpec spec = make_plugin_spec(
            lp, marginals, coupled, n_min, static_cast<double>(in.data.m()));
        r = liu_confidence_interval(lp, sol, spec, f, alpha, liu_draws, seed);
      } else {
        throw std::runtime_error("unknown method '" + method + "'");
      }
      json rep = interval_to_json(r);
      rep["functional"] = functional_spec;
      emit(rep, report_path);
    } else if (*simulate) {
      if (table == 1 || table == 2) {
        Table1Config cfg;
        cfg.include_cdf = (table == 2);
        cfg.threads = threads;
        if (seed) cfg.seed = seed;
        if (sim_m) cfg.ms = {sim_m};
        cfg.replications = paper_scale ? 500 : (sim_reps ? sim_reps : 200);
        emit(table1_to_json(run_table1(cfg)), report_path);
      } else if (table == 3) {
        Table3Config cfg;
        cfg.threads = threads;
        if (seed) cfg.seed = seed;
        if (sim_m) cfg.ms = {sim_m};
        cfg.n = paper_scale ? 1000000 : (sim_n ? sim_n : 100000);
        cfg.replications = paper_scale ? 1000 : (sim_reps ? sim_reps : 300);
        emit(table3_to_json(run_table3(cfg)), report_path);
      } else {
        throw std::runtime_error("unknown table " + std::to_string(table));
      }
    } else if (*ot) {
      detail::Csv a = detail::read_csv(file_a);
      detail::Csv b = detail::read_csv(file_b);
      auto to_measure = [](const detail::Csv& csv) {
        return DiscreteMeasure::from_samples(csv.rows);
      };
      const CoordMetric metric = metric_for(parse_column_type(ot_metric));
      TransportPlan plan = solve_exact(to_measure(a), to_measure(b), metric, p);
      std::cout << plan.wasserstein(p) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
