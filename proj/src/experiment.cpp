#include "abmc/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>

#include "abmc/evidence.hpp"
#include "abmc/oracles.hpp"
#include "abmc/surrogate.hpp"
#include "json.hpp"

namespace abmc {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + where);
  }
}

std::string shift_label(double shift) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", shift);
  return buf;
}

std::string padded(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return buf;
}

template <typename F>
void stage(const char* name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name +
                             " failed: " + e.what());
  }
}

template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::string first_error;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw std::runtime_error(first_error);
}

}  // namespace

// ------------------------------------------------------------------ config

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: parse error: ") +
                                e.what());
  }
  check_keys(doc, "top level",
             {"experiment", "mode", "sc", "training", "model", "test",
              "oracles", "estimate_draws", "out", "seed", "jobs"});
  ExperimentConfig cfg;

  const std::string kind = doc.at("experiment").get<std::string>();
  if (kind == "gaussian")
    cfg.experiment = ExperimentKind::kGaussian;
  else if (kind == "diffusion")
    cfg.experiment = ExperimentKind::kDiffusion;
  else if (kind == "ar")
    cfg.experiment = ExperimentKind::kAr;
  else
    throw std::invalid_argument("config: unknown experiment '" + kind + "'");

  if (doc.contains("mode")) {
    const std::string mode = doc["mode"].get<std::string>();
    if (mode == "npe")
      cfg.mode = SurrogateMode::kNpe;
    else if (mode == "nlpe")
      cfg.mode = SurrogateMode::kNlpe;
    else
      throw std::invalid_argument("config: unknown mode '" + mode + "'");
  }
  if (cfg.mode == SurrogateMode::kNlpe &&
      cfg.experiment == ExperimentKind::kAr)
    throw std::invalid_argument(
        "config: the likelihood surrogate factorizes over exchangeable "
        "observations; the autoregressive family is not exchangeable");

  if (doc.contains("sc")) {
    const json& s = doc["sc"];
    check_keys(s, "sc",
               {"count", "shift", "zero_until", "ramp_end", "s_train",
                "max_per_step"});
    if (s.contains("count")) cfg.sc.count = s["count"].get<std::size_t>();
    if (s.contains("shift")) cfg.sc.shift = s["shift"].get<double>();
    if (s.contains("zero_until"))
      cfg.sc.schedule.zero_until = s["zero_until"].get<std::size_t>();
    if (s.contains("ramp_end"))
      cfg.sc.schedule.ramp_end = s["ramp_end"].get<std::size_t>();
    if (s.contains("s_train"))
      cfg.sc.s_train = s["s_train"].get<std::size_t>();
    if (s.contains("max_per_step"))
      cfg.sc.max_per_step = s["max_per_step"].get<std::size_t>();
    cfg.sc.schedule.validate();
  }

  if (doc.contains("training")) {
    const json& t = doc["training"];
    check_keys(t, "training",
               {"mode", "epochs", "steps_per_epoch", "batch_size",
                "learning_rate", "simulation_budget", "mmd_on_summaries",
                "l2_coefficient", "checkpoint_every"});
    if (t.contains("mode")) {
      const std::string m = t["mode"].get<std::string>();
      if (m == "online")
        cfg.training.mode = TrainMode::kOnline;
      else if (m == "offline")
        cfg.training.mode = TrainMode::kOffline;
      else
        throw std::invalid_argument("config: unknown training mode '" + m +
                                    "'");
    }
    if (t.contains("epochs"))
      cfg.training.epochs = t["epochs"].get<std::size_t>();
    if (t.contains("steps_per_epoch"))
      cfg.training.steps_per_epoch = t["steps_per_epoch"].get<std::size_t>();
    if (t.contains("batch_size"))
      cfg.training.batch_size = t["batch_size"].get<std::size_t>();
    if (t.contains("learning_rate"))
      cfg.training.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("simulation_budget"))
      cfg.training.simulation_budget =
          t["simulation_budget"].get<std::size_t>();
    if (t.contains("mmd_on_summaries"))
      cfg.training.mmd_on_summaries = t["mmd_on_summaries"].get<bool>();
    if (t.contains("l2_coefficient"))
      cfg.training.l2_coefficient = t["l2_coefficient"].get<double>();
    if (t.contains("checkpoint_every"))
      cfg.training.checkpoint_every = t["checkpoint_every"].get<std::size_t>();
  }

  if (doc.contains("model")) {
    const json& m = doc["model"];
    switch (cfg.experiment) {
      case ExperimentKind::kGaussian:
        check_keys(m, "model",
                   {"dim", "rows", "sigma_mu", "randomized_scale",
                    "log_var_lo", "log_var_hi"});
        if (m.contains("dim")) cfg.gaussian.dim = m["dim"].get<std::size_t>();
        if (m.contains("rows"))
          cfg.gaussian.rows = m["rows"].get<std::size_t>();
        if (m.contains("sigma_mu"))
          cfg.gaussian.sigma_mu = m["sigma_mu"].get<double>();
        if (m.contains("randomized_scale"))
          cfg.gaussian.randomized_scale = m["randomized_scale"].get<bool>();
        if (m.contains("log_var_lo"))
          cfg.gaussian.log_var_lo = m["log_var_lo"].get<double>();
        if (m.contains("log_var_hi"))
          cfg.gaussian.log_var_hi = m["log_var_hi"].get<double>();
        break;
      case ExperimentKind::kDiffusion:
        check_keys(m, "model", {"trials_per_condition"});
        if (m.contains("trials_per_condition"))
          cfg.race.trials_per_condition =
              m["trials_per_condition"].get<std::size_t>();
        break;
      case ExperimentKind::kAr:
        check_keys(m, "model", {"transitions"});
        if (m.contains("transitions"))
          cfg.ar.transitions = m["transitions"].get<std::size_t>();
        break;
    }
  }

  if (doc.contains("test")) {
    const json& t = doc["test"];
    check_keys(t, "test", {"count", "shifts"});
    if (t.contains("count")) cfg.test.count = t["count"].get<std::size_t>();
    if (t.contains("shifts"))
      cfg.test.shifts = t["shifts"].get<std::vector<double>>();
  }

  if (doc.contains("oracles")) {
    cfg.oracles = doc["oracles"].get<std::vector<std::string>>();
    for (const std::string& o : cfg.oracles)
      if (o != "analytic" && o != "quadrature" && o != "laplace_is" &&
          o != "bridge")
        throw std::invalid_argument("config: unknown oracle '" + o + "'");
  }

  if (doc.contains("estimate_draws"))
    cfg.estimate_draws = doc["estimate_draws"].get<std::size_t>();
  if (cfg.estimate_draws < 1)
    throw std::invalid_argument("config: estimate_draws must be >= 1");
  if (doc.contains("out")) cfg.out = doc["out"].get<std::string>();
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("jobs")) cfg.jobs = doc["jobs"].get<int>();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::string config_echo(const ExperimentConfig& cfg) {
  json doc;
  switch (cfg.experiment) {
    case ExperimentKind::kGaussian:
      doc["experiment"] = "gaussian";
      doc["model"] = {{"dim", cfg.gaussian.dim},
                      {"rows", cfg.gaussian.rows},
                      {"sigma_mu", cfg.gaussian.sigma_mu},
                      {"randomized_scale", cfg.gaussian.randomized_scale},
                      {"log_var_lo", cfg.gaussian.log_var_lo},
                      {"log_var_hi", cfg.gaussian.log_var_hi}};
      break;
    case ExperimentKind::kDiffusion:
      doc["experiment"] = "diffusion";
      doc["model"] = {
          {"trials_per_condition", cfg.race.trials_per_condition}};
      break;
    case ExperimentKind::kAr:
      doc["experiment"] = "ar";
      doc["model"] = {{"transitions", cfg.ar.transitions}};
      break;
  }
  doc["mode"] = cfg.mode == SurrogateMode::kNpe ? "npe" : "nlpe";
  doc["sc"] = {{"count", cfg.sc.count},
               {"shift", cfg.sc.shift},
               {"zero_until", cfg.sc.schedule.zero_until},
               {"ramp_end", cfg.sc.schedule.ramp_end},
               {"s_train", cfg.sc.s_train},
               {"max_per_step", cfg.sc.max_per_step}};
  doc["training"] = {
      {"mode", cfg.training.mode == TrainMode::kOnline ? "online" : "offline"},
      {"epochs", cfg.training.epochs},
      {"steps_per_epoch", cfg.training.steps_per_epoch},
      {"batch_size", cfg.training.batch_size},
      {"learning_rate", cfg.training.learning_rate},
      {"simulation_budget", cfg.training.simulation_budget},
      {"mmd_on_summaries", cfg.training.mmd_on_summaries},
      {"l2_coefficient", cfg.training.l2_coefficient},
      {"checkpoint_every", cfg.training.checkpoint_every}};
  doc["test"] = {{"count", cfg.test.count}, {"shifts", cfg.test.shifts}};
  doc["oracles"] = cfg.oracles;
  doc["estimate_draws"] = cfg.estimate_draws;
  doc["out"] = cfg.out;
  doc["seed"] = cfg.seed;
  doc["jobs"] = cfg.jobs;
  return doc.dump(2) + "\n";
}

// ------------------------------------------------------------------- run

namespace {

struct TrainedVariant {
  std::string method;
  std::unique_ptr<FlowPosterior> posterior;
  std::unique_ptr<FlowLikelihood> likelihood;
};

FlowPosteriorConfig posterior_config(const GenerativeModel& model) {
  FlowPosteriorConfig pc;
  pc.theta_dim = model.dim();
  pc.obs_cols = model.obs_cols();
  pc.context_dim = model.context_dim();
  pc.recurrent_summary = !model.exchangeable_rows();
  return pc;
}

FlowLikelihoodConfig likelihood_config(const GenerativeModel& model) {
  FlowLikelihoodConfig lc;
  lc.theta_dim = model.dim();
  lc.obs_cols = model.obs_cols();
  if (model.family() == Family::kRace) {
    lc.modeled_cols = {0};  // signed response time
    lc.cov_cols = {1};      // condition label
  } else {
    lc.modeled_cols.clear();
    for (std::size_t j = 0; j < model.obs_cols(); ++j)
      lc.modeled_cols.push_back(j);
    lc.cov_cols = {};
  }
  return lc;
}

void validate_oracles(const ExperimentConfig& cfg,
                      const std::vector<std::unique_ptr<GenerativeModel>>& models) {
  for (const std::string& o : cfg.oracles) {
    for (const auto& m : models) {
      if (o == "analytic" && !m->has_analytic_log_evidence())
        throw std::invalid_argument("oracle 'analytic' unavailable for model " +
                                    m->name());
      if (o == "quadrature" && m->dim() > 1 &&
          m->family() != Family::kGaussian)
        throw std::invalid_argument(
            "oracle 'quadrature' unavailable for model " + m->name());
    }
  }
}


std::string ckpt_path(const ExperimentConfig& cfg, const GenerativeModel& model,
                      const std::string& method) {
  return cfg.out + "/" + model.name() + "_" + method + ".ckpt.json";
}

std::string lik_ckpt_path(const ExperimentConfig& cfg,
                          const GenerativeModel& model,
                          const std::string& method) {
  return cfg.out + "/" + model.name() + "_" + method + ".lik.ckpt.json";
}

std::vector<std::string> variant_methods(const ExperimentConfig& cfg) {
  const std::string base = cfg.mode == SurrogateMode::kNpe ? "npe" : "nlpe";
  return {base, base + "_sc"};
}

// Writes config_echo.json immediately so a failing run still documents what
// it was asked to do; returns the echo for the manifest.
std::string prepare_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  const std::string echo = config_echo(cfg);
  std::ofstream out(cfg.out + "/config_echo.json");
  if (!out)
    throw std::runtime_error("stage setup failed: output directory " +
                             cfg.out + " is not writable");
  out << echo;
  return echo;
}

void finish_manifest(const ExperimentConfig& cfg, const std::string& echo,
                     std::chrono::steady_clock::time_point t0) {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_manifest(cfg.out + "/manifest.json", echo, cfg.seed, wall);
}

std::vector<std::vector<TrainedVariant>> train_all(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    const std::vector<Dataset>& sc_sets) {
  const std::vector<std::string> methods = variant_methods(cfg);
  std::vector<std::vector<TrainedVariant>> trained(models.size());
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const GenerativeModel& model = *models[mi];
    const std::uint64_t seed_m = stream_seed(cfg.seed, "train", mi);
    const FlowPosteriorConfig pc = posterior_config(model);
    for (int with_sc = 0; with_sc < 2; ++with_sc) {
      TrainedVariant var;
      var.method = methods[with_sc];
      var.posterior = std::make_unique<FlowPosterior>(pc, seed_m);
      if (cfg.mode == SurrogateMode::kNlpe)
        var.likelihood =
            std::make_unique<FlowLikelihood>(likelihood_config(model), seed_m);
      TrainingConfig tc = cfg.training;
      tc.seed = seed_m;
      SCConfig scc;
      scc.schedule = cfg.sc.schedule;
      scc.s_train = cfg.sc.s_train;
      scc.max_per_step = cfg.sc.max_per_step;
      if (with_sc) scc.datasets = sc_sets;
      TrainSetup setup;
      setup.posterior = var.posterior.get();
      setup.likelihood = var.likelihood.get();
      setup.model = &model;
      const TrainResult tr = train(setup, tc, scc);
      write_trace_csv(tr.trace, cfg.out + "/trace_" + model.name() + "_" +
                                    var.method + ".csv");
      var.posterior->save(ckpt_path(cfg, model, var.method));
      if (var.likelihood)
        var.likelihood->save(lik_ckpt_path(cfg, model, var.method));
      trained[mi].push_back(std::move(var));
    }
  }
  return trained;
}

std::vector<std::vector<TrainedVariant>> load_all(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models) {
  const std::vector<std::string> methods = variant_methods(cfg);
  std::vector<std::vector<TrainedVariant>> trained(models.size());
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    for (const std::string& method : methods) {
      TrainedVariant var;
      var.method = method;
      var.posterior = FlowPosterior::load(ckpt_path(cfg, *models[mi], method));
      if (cfg.mode == SurrogateMode::kNlpe)
        var.likelihood =
            FlowLikelihood::load(lik_ckpt_path(cfg, *models[mi], method));
      trained[mi].push_back(std::move(var));
    }
  }
  return trained;
}

std::vector<ReportRow> estimate_all(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    const std::vector<std::vector<TrainedVariant>>& trained,
    const std::vector<Dataset>& test_sets) {
  std::vector<ReportRow> rows;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const GenerativeModel& model = *models[mi];
    for (std::size_t vi = 0; vi < trained[mi].size(); ++vi) {
      const TrainedVariant& var = trained[mi][vi];
      std::vector<ReportRow> slot(test_sets.size());
      parallel_for(test_sets.size(), cfg.jobs, [&](std::size_t di) {
        Rng rng = stream_rng(cfg.seed, "estimate", mi, di);
        EvidenceEstimate est =
            cfg.mode == SurrogateMode::kNpe
                ? estimate_log_ml_npe(*var.posterior, model, test_sets[di],
                                      cfg.estimate_draws, rng)
                : estimate_log_ml_nlpe(*var.posterior, *var.likelihood, model,
                                       test_sets[di], cfg.estimate_draws, rng);
        est.method = var.method;
        slot[di] = make_report_row(test_sets[di].id, model.name(), est);
      });
      for (ReportRow& r : slot) rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<ReportRow> oracle_all(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    const std::vector<Dataset>& test_sets) {
  std::vector<ReportRow> rows;
  for (std::size_t oi = 0; oi < cfg.oracles.size(); ++oi) {
    const std::string& oracle = cfg.oracles[oi];
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      const GenerativeModel& model = *models[mi];
      std::vector<ReportRow> slot(test_sets.size());
      parallel_for(test_sets.size(), cfg.jobs, [&](std::size_t di) {
        Rng rng = stream_rng(cfg.seed, "oracle", oi, mi, di);
        EvidenceEstimate est;
        if (oracle == "analytic") {
          est.method = "analytic";
          est.log_ml = model.analytic_log_evidence(test_sets[di]);
        } else if (oracle == "quadrature") {
          est.method = "quadrature";
          est.log_ml = quadrature_log_evidence(model, test_sets[di]);
        } else if (oracle == "laplace_is") {
          est = laplace_is_log_evidence(model, test_sets[di], rng);
        } else {
          est = bridge_log_evidence(model, test_sets[di], rng);
        }
        slot[di] = make_report_row(test_sets[di].id, model.name(), est);
      });
      for (ReportRow& r : slot) rows.push_back(std::move(r));
    }
  }
  return rows;
}

// Replace any existing rows of the incoming methods, keep the rest. Lets
// `estimate` and `oracle` runs compose into one report.
void merge_report(const std::string& path, const std::vector<ReportRow>& fresh) {
  std::vector<ReportRow> merged;
  if (std::filesystem::exists(path)) {
    merged = read_report_csv(path);
    std::set<std::string> replaced;
    for (const ReportRow& r : fresh) replaced.insert(r.method);
    std::erase_if(merged, [&](const ReportRow& r) {
      return replaced.count(r.method) > 0;
    });
  }
  for (const ReportRow& r : fresh) merged.push_back(r);
  write_report_csv(merged, path);
}

void write_full_reports(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    ExperimentResult& result) {
  write_report_csv(result.rows, cfg.out + "/report.csv");

  if (!cfg.oracles.empty()) {
    const std::string& oracle = cfg.oracles.front();
    std::map<std::pair<std::string, std::string>, double> ref;
    for (const ReportRow& r : result.rows)
      if (r.method == oracle) ref[{r.dataset_id, r.model}] = r.log_ml;
    for (const ReportRow& r : result.rows) {
      bool is_oracle = false;
      for (const std::string& o : cfg.oracles)
        if (r.method == o) is_oracle = true;
      if (is_oracle) continue;
      const auto it = ref.find({r.dataset_id, r.model});
      if (it == ref.end()) continue;
      ScatterRow s;
      s.dataset_id = r.dataset_id;
      s.model = r.model;
      s.method = r.method;
      s.oracle = oracle;
      s.oracle_log_ml = it->second;
      s.surrogate_log_ml = r.log_ml;
      result.scatter.push_back(std::move(s));
    }
    write_scatter_csv(result.scatter, cfg.out + "/scatter.csv");
  }

  if (models.size() >= 2) {
    // Posterior model probabilities under a uniform model prior, one row per
    // (dataset, method, model), for every method covering all models.
    std::map<std::string, std::map<std::string, std::map<std::string, double>>>
        by_method;  // method -> dataset -> model -> log_ml
    for (const ReportRow& r : result.rows)
      by_method[r.method][r.dataset_id][r.model] = r.log_ml;
    const std::vector<double> prior(models.size(),
                                    1.0 / static_cast<double>(models.size()));
    std::ofstream out(cfg.out + "/pmps.csv");
    if (!out) throw std::runtime_error("cannot write pmps.csv");
    out << "dataset_id,method,model,pmp\n";
    char buf[40];
    for (const auto& [method, datasets] : by_method)
      for (const auto& [id, per_model] : datasets) {
        if (per_model.size() != models.size()) continue;
        std::vector<double> evs;
        for (const auto& m : models) evs.push_back(per_model.at(m->name()));
        const std::vector<double> pmp = pmps_from_evidences(evs, prior);
        for (std::size_t k = 0; k < models.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%.17g", pmp[k]);
          out << id << ',' << method << ',' << models[k]->name() << ',' << buf
              << '\n';
        }
      }
  }
}

}  // namespace

std::vector<std::unique_ptr<GenerativeModel>> experiment_models(
    const ExperimentConfig& cfg) {
  std::vector<std::unique_ptr<GenerativeModel>> models;
  switch (cfg.experiment) {
    case ExperimentKind::kGaussian:
      models.push_back(std::make_unique<GaussianLocationModel>(cfg.gaussian));
      break;
    case ExperimentKind::kDiffusion: {
      RaceConfig shared = cfg.race, split = cfg.race;
      shared.split_alpha = false;
      split.split_alpha = true;
      models.push_back(std::make_unique<RacingDiffusionModel>(shared));
      models.push_back(std::make_unique<RacingDiffusionModel>(split));
      break;
    }
    case ExperimentKind::kAr:
      for (std::size_t v = 0; v < 4; ++v) {
        ArConfig ac = cfg.ar;
        ac.variant = static_cast<int>(v);
        models.push_back(std::make_unique<ArModel>(ac));
      }
      break;
  }
  return models;
}

void experiment_datasets(
    const ExperimentConfig& cfg,
    const std::vector<std::unique_ptr<GenerativeModel>>& models,
    std::vector<Dataset>& test_sets, std::vector<Dataset>& sc_sets) {
  test_sets.clear();
  sc_sets.clear();
  switch (cfg.experiment) {
    case ExperimentKind::kGaussian: {
      for (std::size_t si = 0; si < cfg.test.shifts.size(); ++si) {
        Rng rng = stream_rng(cfg.seed, "test", si);
        std::vector<Dataset> ds = make_ood_datasets(
            *models[0], cfg.test.shifts[si], cfg.test.count, rng);
        for (std::size_t k = 0; k < ds.size(); ++k) {
          ds[k].id = "mu" + shift_label(cfg.test.shifts[si]) + "_" + padded(k);
          test_sets.push_back(std::move(ds[k]));
        }
      }
      if (cfg.sc.count > 0) {
        Rng rng = stream_rng(cfg.seed, "sc");
        sc_sets = make_ood_datasets(*models[0], cfg.sc.shift, cfg.sc.count, rng);
        for (std::size_t k = 0; k < sc_sets.size(); ++k)
          sc_sets[k].id = "sc_" + padded(k);
      }
      break;
    }
    case ExperimentKind::kDiffusion: {
      const std::size_t per_model = cfg.test.count / models.size();
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        Rng rng = stream_rng(cfg.seed, "test", mi);
        for (std::size_t k = 0; k < per_model; ++k) {
          Draw d = models[mi]->sample_joint(rng);
          d.data.id = "m" + std::to_string(mi) + "_" + padded(k);
          test_sets.push_back(std::move(d.data));
        }
      }
      if (cfg.sc.count > 0) {
        Rng rng = stream_rng(cfg.seed, "sc");
        sc_sets = make_ood_datasets(*models[0], cfg.sc.shift, cfg.sc.count, rng);
        for (std::size_t k = 0; k < sc_sets.size(); ++k)
          sc_sets[k].id = "sc_" + padded(k);
      }
      break;
    }
    case ExperimentKind::kAr: {
      if (cfg.sc.count > 0) {
        Rng rng = stream_rng(cfg.seed, "sc");
        sc_sets = make_ood_datasets(*models[0], cfg.sc.shift, cfg.sc.count, rng);
        for (std::size_t k = 0; k < sc_sets.size(); ++k)
          sc_sets[k].id = "ood_" + padded(k);
        test_sets = sc_sets;  // the observed series are themselves scored
      }
      Rng rng = stream_rng(cfg.seed, "test");
      for (std::size_t k = 0; k < cfg.test.count; ++k) {
        Draw d = models[0]->sample_joint(rng);
        d.data.id = "indist_" + padded(k);
        test_sets.push_back(std::move(d.data));
      }
      break;
    }
  }
}

void run_simulate(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string echo = prepare_out_dir(cfg);
  std::vector<std::unique_ptr<GenerativeModel>> models;
  stage("setup", [&] { models = experiment_models(cfg); });
  std::vector<Dataset> test_sets, sc_sets;
  stage("datasets", [&] { experiment_datasets(cfg, models, test_sets, sc_sets); });
  stage("write", [&] {
    std::filesystem::create_directories(cfg.out + "/data");
    const std::vector<std::string> columns = dataset_columns(*models[0]);
    std::set<std::string> written;
    for (const Dataset& d : test_sets) {
      write_dataset_csv(d, columns, cfg.out + "/data/" + d.id + ".csv");
      written.insert(d.id);
    }
    for (const Dataset& d : sc_sets)
      if (!written.count(d.id))
        write_dataset_csv(d, columns, cfg.out + "/data/" + d.id + ".csv");
  });
  finish_manifest(cfg, echo, t0);
}

void run_train(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string echo = prepare_out_dir(cfg);
  std::vector<std::unique_ptr<GenerativeModel>> models;
  stage("setup", [&] { models = experiment_models(cfg); });
  std::vector<Dataset> test_sets, sc_sets;
  stage("datasets", [&] { experiment_datasets(cfg, models, test_sets, sc_sets); });
  stage("training", [&] { train_all(cfg, models, sc_sets); });
  finish_manifest(cfg, echo, t0);
}

ExperimentResult run_estimate(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string echo = prepare_out_dir(cfg);
  std::vector<std::unique_ptr<GenerativeModel>> models;
  stage("setup", [&] { models = experiment_models(cfg); });
  std::vector<Dataset> test_sets, sc_sets;
  stage("datasets", [&] { experiment_datasets(cfg, models, test_sets, sc_sets); });
  std::vector<std::vector<TrainedVariant>> trained;
  stage("load", [&] { trained = load_all(cfg, models); });
  ExperimentResult result;
  stage("estimates",
        [&] { result.rows = estimate_all(cfg, models, trained, test_sets); });
  stage("report", [&] { merge_report(cfg.out + "/report.csv", result.rows); });
  finish_manifest(cfg, echo, t0);
  return result;
}

ExperimentResult run_oracle(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string echo = prepare_out_dir(cfg);
  std::vector<std::unique_ptr<GenerativeModel>> models;
  stage("setup", [&] {
    if (cfg.oracles.empty())
      throw std::invalid_argument("config: no oracles selected");
    models = experiment_models(cfg);
    validate_oracles(cfg, models);
  });
  std::vector<Dataset> test_sets, sc_sets;
  stage("datasets", [&] { experiment_datasets(cfg, models, test_sets, sc_sets); });
  ExperimentResult result;
  stage("oracles", [&] { result.rows = oracle_all(cfg, models, test_sets); });
  stage("report", [&] { merge_report(cfg.out + "/report.csv", result.rows); });
  finish_manifest(cfg, echo, t0);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string echo = prepare_out_dir(cfg);

  std::vector<std::unique_ptr<GenerativeModel>> models;
  stage("setup", [&] {
    models = experiment_models(cfg);
    validate_oracles(cfg, models);
  });

  std::vector<Dataset> test_sets, sc_sets;
  stage("datasets", [&] { experiment_datasets(cfg, models, test_sets, sc_sets); });

  std::vector<std::vector<TrainedVariant>> trained;
  stage("training", [&] { trained = train_all(cfg, models, sc_sets); });

  ExperimentResult result;
  stage("estimates", [&] {
    result.rows = estimate_all(cfg, models, trained, test_sets);
    // keep the surrogate rows on disk even if an oracle stage fails later
    write_report_csv(result.rows, cfg.out + "/report.csv");
  });

  stage("oracles", [&] {
    std::vector<ReportRow> rows = oracle_all(cfg, models, test_sets);
    for (ReportRow& r : rows) result.rows.push_back(std::move(r));
  });

  stage("report", [&] { write_full_reports(cfg, models, result); });

  finish_manifest(cfg, echo, t0);
  return result;
}

}  // namespace abmc
