#include "lcmopg/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace lcmopg {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ContractViolation(field + ": " + what);
}

double to_double(const std::string& field, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    field_error(field, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& field, const std::string& v) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    field_error(field, "expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  field_error(field, "expected true or false, got '" + v + "'");
}

std::vector<std::string> words(const std::string& v) {
  std::istringstream is(v);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, const std::string& name, const std::string&)> set;
};

template <typename T>
Field int_field(const char* section, const char* key, T TrainConfig::*member) {
  return {section, key, [member](const ExperimentSpec& s) { return std::to_string(s.train.*member); },
          [member](ExperimentSpec& s, const std::string& n, const std::string& v) {
            s.train.*member = static_cast<T>(to_int(n, v));
          }};
}

Field real_field(const char* section, const char* key, double TrainConfig::*member) {
  return {section, key, [member](const ExperimentSpec& s) { return fmt(s.train.*member); },
          [member](ExperimentSpec& s, const std::string& n, const std::string& v) {
            s.train.*member = to_double(n, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment", "env", [](const ExperimentSpec& s) { return s.env; },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         if (v.empty()) field_error(n, "must not be empty");
         s.env = v;
       }},
      {"experiment", "runs", [](const ExperimentSpec& s) { return std::to_string(s.runs); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         s.runs = static_cast<int>(to_int(n, v));
         if (s.runs < 1) field_error(n, "must be >= 1");
       }},
      {"experiment", "seed", [](const ExperimentSpec& s) { return std::to_string(s.seed); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         const long long x = to_int(n, v);
         if (x < 0) field_error(n, "must be >= 0");
         s.seed = static_cast<std::uint64_t>(x);
       }},
      {"experiment", "output", [](const ExperimentSpec& s) { return s.output; },
       [](ExperimentSpec& s, const std::string&, const std::string& v) { s.output = v; }},
      {"experiment", "reference",
       [](const ExperimentSpec& s) {
         std::string out;
         for (double x : s.train.reference) out += (out.empty() ? "" : " ") + fmt(x);
         return out;
       },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         const auto w = words(v);
         s.train.reference.resize(static_cast<Eigen::Index>(w.size()));
         for (std::size_t i = 0; i < w.size(); ++i) s.train.reference[i] = to_double(n, w[i]);
       }},
      real_field("experiment", "hv_scale", &TrainConfig::hv_scale),
      {"experiment", "eval_episodes_per_latent",
       [](const ExperimentSpec& s) { return std::to_string(s.eval_episodes_per_latent); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         s.eval_episodes_per_latent = static_cast<int>(to_int(n, v));
         if (s.eval_episodes_per_latent < 1) field_error(n, "must be >= 1");
       }},
      int_field("policy", "latent_dim", &TrainConfig::latent_dim),
      int_field("policy", "width", &TrainConfig::width),
      int_field("policy", "depth", &TrainConfig::depth),
      int_field("policy", "inflation", &TrainConfig::inflation),
      {"policy", "state_embedding",
       [](const ExperimentSpec& s) {
         std::string out;
         for (int x : s.train.state_embedding) out += (out.empty() ? "" : " ") + std::to_string(x);
         return out;
       },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         s.train.state_embedding.clear();
         for (const auto& w : words(v)) {
           const long long x = to_int(n, w);
           if (x < 0) field_error(n, "widths must be >= 0");
           s.train.state_embedding.push_back(static_cast<int>(x));
         }
       }},
      real_field("policy", "beta_offset", &TrainConfig::beta_offset),
      real_field("policy", "init_stddev", &TrainConfig::init_stddev),
      {"scoring", "normalization",
       [](const ExperimentSpec& s) { return to_string(s.train.normalization); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         try {
           s.train.normalization = parse_normalization(v);
         } catch (const std::exception& e) {
           field_error(n, e.what());
         }
       }},
      {"scoring", "centering", [](const ExperimentSpec& s) { return to_string(s.train.centering); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         try {
           s.train.centering = parse_centering(v);
         } catch (const std::exception& e) {
           field_error(n, e.what());
         }
       }},
      int_field("scoring", "k", &TrainConfig::k_nn),
      real_field("scoring", "beta", &TrainConfig::beta),
      {"scoring", "clip", [](const ExperimentSpec& s) { return std::string(s.train.clip ? "true" : "false"); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         s.train.clip = to_bool(n, v);
       }},
      {"trainer", "variant", [](const ExperimentSpec& s) { return to_string(s.train.variant); },
       [](ExperimentSpec& s, const std::string& n, const std::string& v) {
         try {
           s.train.variant = parse_variant(v);
         } catch (const std::exception& e) {
           field_error(n, e.what());
         }
       }},
      int_field("trainer", "n_lat_train", &TrainConfig::n_lat_train),
      int_field("trainer", "n_lat_test", &TrainConfig::n_lat_test),
      real_field("trainer", "gamma", &TrainConfig::gamma),
      int_field("trainer", "iterations", &TrainConfig::iterations),
      int_field("trainer", "max_len_train", &TrainConfig::max_len_train),
      int_field("trainer", "max_len_test", &TrainConfig::max_len_test),
      int_field("trainer", "test_episodes_per_latent", &TrainConfig::test_episodes_per_latent),
      real_field("trainer", "learning_rate", &TrainConfig::learning_rate),
      real_field("trainer", "collapse_fraction", &TrainConfig::collapse_fraction),
      int_field("value", "epochs", &TrainConfig::qv_epochs),
      int_field("value", "batch_size", &TrainConfig::qv_batch),
      int_field("value", "width", &TrainConfig::qv_width),
      int_field("value", "depth", &TrainConfig::qv_depth),
  };
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (section == f.section && key == f.key) return &f;
  return nullptr;
}

std::string base_env(const std::string& env_id) {
  const auto pos = env_id.find("-generated");
  if (pos != std::string::npos) return env_id.substr(0, pos);
  return env_id;
}

}  // namespace

bool ExperimentSpec::operator==(const ExperimentSpec& other) const {
  return spec_to_entries(*this) == spec_to_entries(other);
}

std::vector<std::pair<std::string, std::string>> spec_to_entries(const ExperimentSpec& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields())
    out.emplace_back(std::string(f.section) + "." + f.key, f.get(spec));
  return out;
}

void write_spec(std::ostream& os, const ExperimentSpec& spec) {
  os << "# lcmopg experiment spec 1\n";
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    const std::string v = f.get(spec);
    os << f.key << " =" << (v.empty() ? "" : " ") << v << '\n';
  }
}

ExperimentSpec parse_spec(std::istream& is) {
  ExperimentSpec spec;
  spec.train.reference.resize(0);
  std::string section, line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ContractViolation("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string name = section + "." + key;
    const Field* f = find_field(section, key);
    if (!f) throw ContractViolation(name + ": unknown field");
    if (!seen.insert(name).second) throw ContractViolation(name + ": duplicate field");
    f->set(spec, name, value);
  }
  if (!seen.count("experiment.reference")) spec.train.reference = default_reference_point(spec.env);
  return spec;
}

ExperimentSpec parse_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file: " + path.string());
  return parse_spec(in);
}

void apply_override(ExperimentSpec& spec, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ContractViolation("override '" + assignment + "': expected key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const Field* match = nullptr;
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    match = find_field(key.substr(0, dot), key.substr(dot + 1));
  } else {
    for (const auto& f : fields()) {
      if (key != f.key) continue;
      if (match) throw ContractViolation("override '" + key + "' is ambiguous; use section.key");
      match = &f;
    }
  }
  if (!match) throw ContractViolation("override '" + key + "': unknown field");
  match->set(spec, std::string(match->section) + "." + match->key, value);
}

ReturnVector default_reference_point(const std::string& env_id) {
  const std::string e = base_env(env_id);
  if (e == "dst-convex") return Vector{{0.0, -19.0}};
  if (e == "dst-original") return Vector{{0.0, -200.0}};
  if (e == "ftn5" || e == "ftn6" || e == "ftn7") return ReturnVector::Zero(kFtnObjectives);
  if (e.rfind("lqg2d", 0) == 0) return ReturnVector::Constant(2, -310.0);
  if (e.rfind("lqg3d", 0) == 0) return ReturnVector::Constant(3, -500.0);
  if (e == "minecart") return Vector{{0.0, 0.0, -200.0}};
  throw ContractViolation("no reference point known for environment '" + env_id + "'");
}

double default_hv_scale(const std::string& env_id) {
  const std::string e = base_env(env_id);
  if (e.rfind("lqg2d", 0) == 0) return 160.0 * 160.0;
  if (e.rfind("lqg3d", 0) == 0) return 350.0 * 350.0 * 350.0;
  return 1.0;
}

std::vector<std::string> preset_env_ids() { return known_env_ids(); }

ExperimentSpec paper_preset(const std::string& env_id) {
  ExperimentSpec s;
  s.env = env_id;
  s.runs = 5;
  s.output = env_id;
  TrainConfig& t = s.train;
  t.depth = 3;
  const std::string e = base_env(env_id);
  if (e == "dst-convex" || e == "dst-original") {
    t.latent_dim = 3;
    t.inflation = 5;
    t.n_lat_train = t.n_lat_test = 400;
    t.width = 36;
    t.max_len_train = t.max_len_test = 50;
    t.k_nn = 10;
    t.beta = 4.0;
    t.gamma = e == "dst-convex" ? 0.99 : 1.0;
    t.normalization = NormalizationMode::MaxMin;
    t.iterations = 30;
  } else if (e == "ftn5" || e == "ftn6" || e == "ftn7") {
    const int d = e[3] - '0';
    t.gamma = 0.99;
    t.normalization = NormalizationMode::MaxMin;
    t.iterations = 20;
    t.max_len_train = t.max_len_test = d;  // every episode has length d
    if (d == 5) {
      t.latent_dim = 5;
      t.n_lat_train = t.n_lat_test = 300;
      t.width = 100;
      t.k_nn = 3;
      t.beta = 5.0;
      t.state_embedding = {10, 20};
    } else {
      t.latent_dim = 7;
      t.n_lat_train = 400;
      t.n_lat_test = 1500;
      t.width = d == 6 ? 140 : 210;
      t.k_nn = 10;
      t.beta = 10.0;
      t.state_embedding = {10, 10};
    }
  } else if (e.rfind("lqg", 0) == 0) {
    const bool two = e.rfind("lqg2d", 0) == 0;
    if (!two && e.rfind("lqg3d", 0) != 0) throw ContractViolation("no preset for " + env_id);
    t.latent_dim = two ? 2 : 3;
    t.n_lat_train = two ? 200 : 300;
    t.n_lat_test = 1500;
    t.width = two ? 24 : 30;
    t.max_len_train = t.max_len_test = 30;
    t.k_nn = 3;
    t.beta = 10.0;
    t.gamma = 0.9;
    t.normalization = NormalizationMode::Robust;
    t.iterations = two ? 500 : 800;
    t.qv_epochs = 1;
    t.qv_batch = two ? 64 : 100;
    t.qv_width = two ? 24 : 30;
    t.qv_depth = 3;
    if (e.ends_with("-noisy")) {
      t.test_episodes_per_latent = 10;
      s.eval_episodes_per_latent = 200;
    }
  } else if (e == "minecart") {
    t.latent_dim = 3;
    t.n_lat_train = 400;
    t.n_lat_test = 2000;
    t.width = 36;
    t.max_len_train = 100;
    t.max_len_test = 1000;
    t.k_nn = 3;
    t.beta = 6.0;
    t.gamma = 1.0;
    t.normalization = NormalizationMode::MaxMin;
    t.iterations = 3000;
    t.state_embedding = {10, 10, 10, 10, 10, 10};
  } else {
    throw ContractViolation("no preset for environment '" + env_id + "'");
  }
  t.centering = default_centering(t.normalization);
  t.reference = default_reference_point(env_id);
  t.hv_scale = default_hv_scale(env_id);
  return s;
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("LCMOPG_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

std::uint64_t run_seed(std::uint64_t master, int run) {
  Rng rng = derive_stream(master, 0x72756e, static_cast<std::uint64_t>(run));
  return rng();
}

RunRecord run_single(const ExperimentSpec& spec, int run, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.run = run;
  rec.seed = run_seed(spec.seed, run);
  TrainConfig tc = spec.train;
  tc.seed = rec.seed;
  tc.threads = options.threads;
  // The environment (including any generated FTN table) is shared by all runs.
  const EnvFactory factory = make_env_factory(spec.env, spec.seed);
  IterationCallback cb;
  if (options.log && options.log_every > 0) {
    cb = [&](const HistoryRow& row) {
      if (row.iteration % options.log_every == 0)
        *options.log << "  run " << run << " iter " << row.iteration << " test HV " << row.test_hv
                     << " best " << row.best_hv << " (" << row.seconds << " s)\n"
                     << std::flush;
      return true;
    };
  }
  rec.train = train(tc, factory, cb);
  EvalConfig ec;
  ec.n_latents = tc.n_lat_test;
  ec.episodes_per_latent = spec.eval_episodes_per_latent;
  ec.gamma = tc.gamma;
  ec.max_steps = tc.max_len_test;
  ec.reference = tc.reference;
  ec.hv_scale = tc.hv_scale;
  ec.seed = rec.seed;
  ec.stream = 0x6576616c;
  ec.threads = options.threads;
  rec.final_eval = evaluate(rec.train.best_policy, factory, ec);
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (options.write_files) {
    const std::filesystem::path out = std::filesystem::path(spec.output).is_absolute()
                                          ? std::filesystem::path(spec.output)
                                          : output_root() / spec.output;
    const auto dir = out / ("run_" + std::to_string(run));
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "spec.txt") << [&] {
      std::ostringstream os;
      write_spec(os, spec);
      return os.str();
    }();
    std::ofstream metrics(dir / "metrics.csv");
    write_history_csv(metrics, rec.train.history);
    std::ofstream ckpt(dir / "best_policy.txt");
    write_policy(ckpt, rec.train.best_policy);
    std::ofstream pf(dir / "pf.csv");
    write_pf_csv(pf, rec.final_eval);
    std::ofstream summary(dir / "summary.txt");
    summary.precision(17);
    summary << "seed " << rec.seed << "\nstatus " << to_string(rec.train.status)
            << "\nmessage " << rec.train.message << "\nbest_iteration "
            << rec.train.best_iteration << "\nbest_test_hv " << rec.train.best_hv
            << "\nfinal_hv " << rec.final_eval.hv << "\nfront_size " << rec.final_eval.front.size()
            << "\nseconds " << rec.seconds << '\n';
  }
  if (options.log) {
    *options.log << "run " << run << " (seed " << rec.seed << "): best test HV "
                 << rec.train.best_hv << " at iteration " << rec.train.best_iteration
                 << ", re-evaluated " << rec.final_eval.hv << ", " << to_string(rec.train.status) << ", "
                 << rec.seconds << " s\n"
                 << std::flush;
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  require(spec.runs >= 1, "run_experiment: runs must be >= 1");
  ExperimentResult res;
  for (int r = 0; r < spec.runs; ++r) res.runs.push_back(run_single(spec, r, options));
  auto stats = [&](auto get, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& r : res.runs) sum += get(r);
    mean = sum / static_cast<double>(res.runs.size());
    double var = 0.0;
    for (const auto& r : res.runs) var += (get(r) - mean) * (get(r) - mean);
    sd = std::sqrt(var / static_cast<double>(res.runs.size()));
  };
  stats([](const RunRecord& r) { return r.train.best_hv; }, res.mean_best_hv, res.std_best_hv);
  stats([](const RunRecord& r) { return r.final_eval.hv; }, res.mean_hv, res.std_hv);
  return res;
}

}  // namespace lcmopg
