#include "wharm/experiment.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace wharm {

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

void footer(std::ostream& out, const ExperimentConfig& cfg) {
  out << "# dataset=" << cfg.dataset << "\n";
  out << "# config_hash=" << cfg.config_hash << "\n";
  out << "# seed=" << cfg.seed << "\n";
  out << "# library_version=" << kLibraryVersion << "\n";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::parse(const std::string& json_text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(json_text);
    read_opt(j, "dataset", cfg.dataset);
    if (j.contains("data_dir")) cfg.data_dir = resolve(base_dir, j.at("data_dir").get<std::string>());
    if (j.contains("template_config")) {
      cfg.template_config = resolve(base_dir, j.at("template_config").get<std::string>());
    }
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    read_opt(j, "seed", cfg.seed);
    read_opt(j, "train_subset", cfg.train_subset);
    read_opt(j, "test_subset", cfg.test_subset);
    read_opt(j, "full_scale", cfg.full_scale);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read_opt(t, "learning_rate", cfg.train.learning_rate);
      read_opt(t, "momentum", cfg.train.momentum);
      read_opt(t, "weight_decay", cfg.train.weight_decay);
      read_opt(t, "batch_size", cfg.train.batch_size);
      read_opt(t, "epochs", cfg.train.epochs);
    }
    if (j.contains("attack")) {
      const auto& a = j.at("attack");
      read_opt(a, "radius", cfg.attack.radius);
      read_opt(a, "steps", cfg.attack.steps);
      read_opt(a, "step_size", cfg.attack.step_size);
      read_opt(a, "aware_extra", cfg.attack.aware_extra);
      if (a.contains("target") && !a.at("target").is_null()) cfg.attack.target = a.at("target").get<int>();
    }
    if (j.contains("detection")) {
      const auto& d = j.at("detection");
      read_opt(d, "pool", cfg.detection.pool);
      read_opt(d, "repeats", cfg.detection.repeats);
      read_opt(d, "targeted", cfg.detection.targeted);
    }
    if (j.contains("bias")) {
      const auto& b = j.at("bias");
      read_opt(b, "trials", cfg.bias.trials);
      read_opt(b, "confidence", cfg.bias.confidence);
      read_opt(b, "max_train_nat", cfg.bias.max_train_nat);
      read_opt(b, "max_train_adv", cfg.bias.max_train_adv);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  cfg.config_hash = fnv1a_hex(json_text);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  try {
    train.validate();
    attack.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (train_subset == 0 || test_subset == 0) throw ConfigError("train_subset and test_subset must be positive");
  if (detection.repeats == 0 || detection.pool == 0) throw ConfigError("detection pool and repeats must be positive");
  if (bias.trials < 2) throw ConfigError("bias trials must be at least 2");
  if (!(bias.confidence > 0.0 && bias.confidence < 1.0)) throw ConfigError("bias confidence must lie in (0, 1)");
  for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                           "t10k-labels-idx1-ubyte"}) {
    const auto p = data_dir / name;
    if (!std::filesystem::exists(p) && !std::filesystem::exists(p.string() + ".gz")) {
      throw ConfigError("dataset file missing: " + p.string());
    }
  }
  if (template_config && !std::filesystem::exists(*template_config)) {
    throw ConfigError("template config missing: " + template_config->string());
  }
}

TemplateConfig ExperimentConfig::templates(FeatureKind kind) const {
  TemplateConfig t = template_config ? TemplateConfig::load(*template_config) : TemplateConfig::default_family(kind);
  t.kind = kind;
  return t;
}

std::uint64_t ExperimentConfig::derived_seed(std::string_view purpose) const {
  const std::string h = fnv1a_hex(std::to_string(seed) + ":" + std::string(purpose));
  return std::stoull(h, nullptr, 16);
}

namespace {

std::filesystem::path idx_path(const std::filesystem::path& dir, const std::string& name) {
  const auto p = dir / name;
  if (std::filesystem::exists(p)) return p;
  return p.string() + ".gz";
}

}  // namespace

Datasets load_datasets(const ExperimentConfig& cfg) {
  Datasets d;
  LabeledSet train = load_idx(idx_path(cfg.data_dir, "train-images-idx3-ubyte"),
                              idx_path(cfg.data_dir, "train-labels-idx1-ubyte"));
  LabeledSet test = load_idx(idx_path(cfg.data_dir, "t10k-images-idx3-ubyte"),
                             idx_path(cfg.data_dir, "t10k-labels-idx1-ubyte"));
  if (cfg.full_scale) {
    d.train = std::move(train);
    d.test = std::move(test);
  } else {
    const auto train_seed = cfg.derived_seed("train-subset");
    const auto test_seed = cfg.derived_seed("test-subset");
    const auto train_rows = sample_rows(train.size(), std::min(cfg.train_subset, train.size()), train_seed);
    const auto test_rows = sample_rows(test.size(), std::min(cfg.test_subset, test.size()), test_seed);
    d.train = train.subset(train_rows);
    d.test = test.subset(test_rows);
    d.train.provenance["subset_seed"] = std::to_string(train_seed);
    d.test.provenance["subset_seed"] = std::to_string(test_seed);
  }
  d.train.provenance["split"] = "train:" + std::to_string(d.train.size());
  d.test.provenance["split"] = "t10k:" + std::to_string(d.test.size());
  return d;
}

std::shared_ptr<const FeatureBank> make_bank(const ExperimentConfig& cfg, FeatureKind kind) {
  return std::make_shared<const FeatureBank>(enumerate_bank({28, 28}, cfg.templates(kind)));
}

TrainResult train_holomorphic(const ExperimentConfig& cfg, std::shared_ptr<const FeatureBank> bank,
                              const LabeledSet& data, std::uint64_t seed) {
  if (bank->kind() != FeatureKind::Holomorphic) throw ConfigError("train_holomorphic needs a holomorphic bank");
  Classifier c = Classifier::random(std::move(bank), 10, seed);
  c.attach_zero_class();
  TrainConfig tc = cfg.train;
  tc.seed = seed ^ 0x5bd1e995ULL;
  return train(std::move(c), data, tc);
}

std::vector<DetectionRow> run_detection_table(const ExperimentConfig& cfg, const Classifier& h,
                                              const LabeledSet& test) {
  std::vector<std::optional<int>> targets{std::nullopt};
  if (cfg.detection.targeted) {
    for (int t = 0; t < 10; ++t) targets.emplace_back(t);
  }
  std::vector<DetectionRow> rows;
  for (const auto& target : targets) {
    DetectionRow row;
    row.target = target;
    for (bool aware : {true, false}) {
      DetectionReport avg;
      for (std::size_t r = 0; r < cfg.detection.repeats; ++r) {
        const std::string tag = "detect:" + std::to_string(r);
        const auto pool_rows =
            sample_rows(test.size(), std::min(cfg.detection.pool, test.size()), cfg.derived_seed(tag + ":pool"));
        const LabeledSet pool = test.subset(pool_rows);
        AttackConfig ac = cfg.attack;
        ac.target = target;
        ac.aware_extra = aware;
        ac.seed = cfg.derived_seed(tag + ":attack:" + (target ? std::to_string(*target) : "u") + (aware ? "a" : "n"));
        const auto rep = detect_run(h, pool, ac);
        avg.precision += rep.precision;
        avg.recall += rep.recall;
        avg.f1 += rep.f1;
        avg.counts.tp += rep.counts.tp;
        avg.counts.fp += rep.counts.fp;
        avg.counts.fn += rep.counts.fn;
        avg.counts.tn += rep.counts.tn;
        avg.degenerate = avg.degenerate || rep.degenerate;
      }
      const double n = double(cfg.detection.repeats);
      avg.precision /= n;
      avg.recall /= n;
      avg.f1 /= n;
      (aware ? row.aware : row.unaware) = avg;
    }
    rows.push_back(row);
  }
  return rows;
}

TestPools build_test_pools(const ExperimentConfig& cfg, const Classifier& h, const LabeledSet& test) {
  AttackConfig ac = cfg.attack;
  ac.target.reset();
  ac.seed = cfg.derived_seed("test-pool");
  TestPools pools;
  pools.benign = test.with_origin(Origin::Natural);
  pools.adversarial = adversarial_inside(h, test, ac);
  if (pools.adversarial.empty()) throw DetectionError("no adversarial test example landed inside the polyhedron");
  return pools;
}

InfeasibilityResult run_infeasibility(const ExperimentConfig& cfg, const Classifier& h, const Partition& partition,
                                      const TestPools& pools) {
  auto bank = h.bank_ptr();
  Classifier f = train_holomorphic(cfg, bank, partition.s_adv, cfg.derived_seed("train-f")).classifier;
  Classifier g = train_holomorphic(cfg, bank, partition.s_union, cfg.derived_seed("train-g")).classifier;
  InfeasibilityResult out{{}, f, g};
  for (const auto& [name, c] : {std::pair<std::string, const Classifier*>{"h", &h}, {"f", &f}, {"g", &g}}) {
    out.rows.push_back({name, accuracy(*c, pools.adversarial), accuracy(*c, pools.benign)});
  }
  return out;
}

BiasTables run_bias_tables(const ExperimentConfig& cfg, const Partition& partition, const TestPools& pools) {
  BiasData data;
  data.bank = make_bank(cfg, FeatureKind::Cosine);
  data.train = partition;
  if (cfg.bias.max_train_nat > 0 && partition.s_nat.size() > cfg.bias.max_train_nat) {
    data.train.s_nat = partition.s_nat.subset(
        sample_rows(partition.s_nat.size(), cfg.bias.max_train_nat, cfg.derived_seed("bias-nat-cap")));
  }
  if (cfg.bias.max_train_adv > 0 && partition.s_adv.size() > cfg.bias.max_train_adv) {
    data.train.s_adv = partition.s_adv.subset(
        sample_rows(partition.s_adv.size(), cfg.bias.max_train_adv, cfg.derived_seed("bias-adv-cap")));
  }
  data.train.s_union = data.train.s_nat;
  data.train.s_union.append(data.train.s_adv);
  data.test_nat = pools.benign;
  data.test_adv = pools.adversarial;

  BiasTables out;
  out.discontinuous = run_bias_test(cfg.bias.trials, cfg.bias.confidence, [&](std::size_t t) {
    const auto task = random_binary_task(cfg.derived_seed("bias-task:" + std::to_string(t)));
    const auto s = continuity_bias_trial(data, task, cfg.train, cfg.derived_seed("bias-trial:" + std::to_string(t)));
    out.discontinuous_samples.push_back(s);
    return s.epsilon;
  });
  out.continuous = run_bias_test(cfg.bias.trials, cfg.bias.confidence, [&](std::size_t t) {
    auto target = std::make_shared<const HarmonicTarget>(
        random_harmonic_target(data.bank, cfg.derived_seed("bias-target:" + std::to_string(t))));
    const auto s = continuity_bias_trial(data, RegressionTask{target}, cfg.train,
                                         cfg.derived_seed("bias-regression:" + std::to_string(t)));
    out.continuous_samples.push_back(s);
    return s.epsilon;
  });
  return out;
}

void write_detection_csv(const ExperimentConfig& cfg, const std::vector<DetectionRow>& rows,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "target";
  for (const char* block : {"aware", "unaware"}) {
    for (const char* col : {"precision", "recall", "f1", "tp", "fp", "fn", "tn", "degenerate"}) {
      out << ',' << block << '_' << col;
    }
  }
  out << "\n";
  for (const auto& row : rows) {
    out << (row.target ? std::to_string(*row.target) : std::string("untargeted"));
    for (const auto* r : {&row.aware, &row.unaware}) {
      out << ',' << fmt(r->precision) << ',' << fmt(r->recall) << ',' << fmt(r->f1) << ',' << r->counts.tp << ','
          << r->counts.fp << ',' << r->counts.fn << ',' << r->counts.tn << ',' << (r->degenerate ? 1 : 0);
    }
    out << "\n";
  }
  out << "# repeats=" << cfg.detection.repeats << " pool=" << cfg.detection.pool << " attack=" << describe(cfg.attack)
      << "\n";
  footer(out, cfg);
}

void write_infeasibility_csv(const ExperimentConfig& cfg, const std::vector<AccuracyRow>& rows,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "classifier,adversarial,benign\n";
  for (const auto& r : rows) out << r.name << ',' << fmt(r.adversarial) << ',' << fmt(r.benign) << "\n";
  out << "# test pools: benign = t10k subset, adversarial = attacked t10k subset inside the polyhedron of h\n";
  footer(out, cfg);
}

void write_bias_csv(const ExperimentConfig& cfg, const BiasTables& tables, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dataset,critical_value,continuous_statistic,continuous_h1,discontinuous_statistic,discontinuous_h1\n";
  out << cfg.dataset << ',' << fmt(tables.discontinuous.critical) << ',' << fmt(tables.continuous.statistic) << ','
      << to_string(tables.continuous.decision) << ',' << fmt(tables.discontinuous.statistic) << ','
      << to_string(tables.discontinuous.decision) << "\n";
  out << "# epsilon loss: 0-1 for classification trials, mean squared error for regression trials\n";
  out << "# trials=" << cfg.bias.trials << " confidence=" << cfg.bias.confidence << "\n";
  auto dump = [&](const char* name, const std::vector<BiasSample>& samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "# %s trial %zu: epsilon=%.17g union=%.17g switching=%.17g\n", name, i,
                    samples[i].epsilon, samples[i].union_loss, samples[i].switching_loss);
      out << buf;
    }
  };
  dump("discontinuous", tables.discontinuous_samples);
  dump("continuous", tables.continuous_samples);
  footer(out, cfg);
}

}  // namespace wharm
