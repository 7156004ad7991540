#include "rclab/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rclab/enumerate.hpp"
#include "rclab/io.hpp"
#include "rclab/observables.hpp"
#include "rclab/renorm.hpp"
#include "rclab/sampler.hpp"
#include "rclab/threshold.hpp"

namespace rclab {

namespace {

using ordered_json = nlohmann::ordered_json;

void print_error(const std::string& msg, int code) {
  ordered_json j;
  j["error"] = msg;
  j["exit"] = code;
  std::cerr << j.dump() << "\n";
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
T parse_value(const std::string& s);

template <>
double parse_value<double>(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw std::invalid_argument("not a number: " + s);
  }
  if (pos != s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

template <>
std::int64_t parse_value<std::int64_t>(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (...) {
    throw std::invalid_argument("not an integer: " + s);
  }
  if (pos != s.size()) throw std::invalid_argument("not an integer: " + s);
  return v;
}

template <>
int parse_value<int>(const std::string& s) {
  std::int64_t v = parse_value<std::int64_t>(s);
  if (v < INT32_MIN || v > INT32_MAX) {
    throw std::invalid_argument("integer out of range: " + s);
  }
  return static_cast<int>(v);
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (...) {
    throw std::invalid_argument("not an unsigned integer: " + s);
  }
  if (pos != s.size()) throw std::invalid_argument("not an unsigned integer: " + s);
  return v;
}

template <>
std::string parse_value<std::string>(const std::string& s) {
  return s;
}

std::string record_value(double v) { return format_double(v); }
std::string record_value(int v) { return std::to_string(v); }
std::string record_value(std::int64_t v) { return std::to_string(v); }
std::string record_value(std::uint64_t v) { return std::to_string(v); }
std::string record_value(const std::string& v) { return v; }

// Resolution order: command-line flag, then config file, then the coded
// default. Everything resolved with record=true lands in the manifest.
struct Ctx {
  const CLI::App* sc = nullptr;
  std::map<std::string, std::string> file;
  std::map<std::string, std::string> used;

  bool flag_given(const std::string& flag) const {
    return sc->count(flag) > 0;
  }

  template <class T>
  T get(const std::string& flag, const T& bound, bool record = true) {
    std::string key = flag.substr(2);
    T v = bound;
    if (!flag_given(flag)) {
      auto it = file.find(key);
      if (it != file.end()) v = parse_value<T>(it->second);
    }
    if (record) used[key] = record_value(v);
    return v;
  }
};

struct CommonFlags {
  int dim = 3;
  double q = 1.0;
  double p = 0.5;
  double beta = 0.0;
  std::string bc = "free";
  std::uint64_t seed = 1;
  std::int64_t sweeps = 1000;
  std::int64_t burnin = 100;
  std::int64_t thin = 1;
  int replicas = 1;
  int replica_base = 0;
  std::string engine = "auto";
  std::string out = ".";
  std::string format = "csv";
  int threads = 0;
  bool serial = false;
  std::string config;
};

void add_common(CLI::App* sc, CommonFlags& f) {
  sc->add_option("--dim", f.dim, "lattice dimension (2..4)");
  sc->add_option("--q", f.q, "cluster weight, q >= 1");
  sc->add_option("--p", f.p, "bond intensity in [0,1]");
  sc->add_option("--beta", f.beta, "coupling; maps to p = 1 - exp(-2 beta)");
  sc->add_option("--bc", f.bc, "free | wired | mixed:<classes>");
  sc->add_option("--seed", f.seed, "master RNG seed");
  sc->add_option("--sweeps", f.sweeps, "sweeps after burn-in");
  sc->add_option("--burnin", f.burnin, "burn-in sweeps");
  sc->add_option("--thin", f.thin, "keep every k-th sweep");
  sc->add_option("--replicas", f.replicas, "independent chains");
  sc->add_option("--replica-base", f.replica_base, "first replica id");
  sc->add_option("--engine", f.engine, "auto | heatbath | cluster | product");
  sc->add_option("--out", f.out, "output directory");
  sc->add_option("--format", f.format, "csv | json estimate tables");
  sc->add_option("--threads", f.threads, "replica worker threads");
  sc->add_flag("--serial", f.serial, "run the serial reference path");
  sc->add_option("--config", f.config, "key=value config file; flags win");
}

Engine engine_from(const std::string& s) {
  if (s == "auto") return Engine::Auto;
  if (s == "heatbath") return Engine::HeatBath;
  if (s == "cluster") return Engine::ClusterES;
  if (s == "product") return Engine::Product;
  throw std::invalid_argument("unknown engine: " + s);
}

struct Wants {
  bool p = true;
  bool bc = true;
  bool chain = true;
};

struct Run {
  int dim = 3;
  RcParams params;
  BoundaryCondition bc;
  SamplerCfg scfg;
  std::string out;
  std::string format;
  Ctx ctx;
};

Run resolve_common(const CLI::App* sc, const CommonFlags& cf, Wants w) {
  Run r;
  r.ctx.sc = sc;
  if (sc->count("--config") > 0) {
    r.ctx.file = parse_config_file(read_text_file(cf.config));
  }
  r.dim = r.ctx.get("--dim", cf.dim);
  if (r.dim < 2 || r.dim > kMaxDim) {
    throw std::invalid_argument("dim must lie in [2,4]");
  }
  r.params.q = r.ctx.get("--q", cf.q);
  if (w.p) {
    bool has_p = r.ctx.flag_given("--p") || r.ctx.file.count("p") > 0;
    bool has_beta = r.ctx.flag_given("--beta") || r.ctx.file.count("beta") > 0;
    if (has_p && has_beta) {
      throw std::invalid_argument("give exactly one of --p and --beta");
    }
    if (has_beta) {
      double beta = r.ctx.get("--beta", cf.beta);
      r.params.p = ising_to_fk(beta);
    } else {
      r.params.p = r.ctx.get("--p", cf.p);
    }
    r.params.validate();
  }
  if (w.bc) {
    std::string bcs = r.ctx.get("--bc", cf.bc);
    r.bc = parse_bc(bcs, r.dim);
  }
  r.scfg.seed = r.ctx.get("--seed", cf.seed);
  if (w.chain) {
    r.scfg.sweeps = r.ctx.get("--sweeps", cf.sweeps);
    r.scfg.burn_in = r.ctx.get("--burnin", cf.burnin);
    r.scfg.thinning = r.ctx.get("--thin", cf.thin);
    r.scfg.replicas = r.ctx.get("--replicas", cf.replicas);
    r.scfg.replica_base = r.ctx.get("--replica-base", cf.replica_base);
    r.scfg.engine = engine_from(r.ctx.get("--engine", cf.engine));
  }
  int threads = r.ctx.get("--threads", cf.threads, false);
  bool serial = cf.serial;
  if (!serial) {
    auto it = r.ctx.file.find("serial");
    serial = it != r.ctx.file.end() &&
             (it->second == "true" || it->second == "1");
  }
  r.scfg.exec = serial ? ExecMode::Serial : ExecMode::Parallel;
  if (threads > 0) set_worker_count(threads);
  if (w.chain) r.scfg.validate();
  r.out = r.ctx.get("--out", cf.out, false);
  r.format = r.ctx.get("--format", cf.format);
  if (r.format != "csv" && r.format != "json") {
    throw std::invalid_argument("format must be csv or json");
  }
  return r;
}

struct OutDir {
  std::filesystem::path dir;

  explicit OutDir(const std::string& d) : dir(d) {
    std::filesystem::create_directories(dir);
  }
  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
  void text(const std::string& name, const std::string& content) const {
    write_text_file(path(name), content);
  }
};

ordered_json est_summary(const Estimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["ci"] = e.half_width;
  j["n"] = e.n_samples;
  j["batches"] = e.batches;
  j["method"] = e.method;
  return j;
}

void write_table(const OutDir& od, const std::string& stem, const Run& r,
                 const std::vector<std::pair<std::string, Estimate>>& rows) {
  if (r.format == "json") {
    ordered_json arr = ordered_json::array();
    for (const auto& [id, e] : rows) {
      ordered_json row;
      row["id"] = id;
      row["q"] = r.params.q;
      row["p"] = r.params.p;
      row["value"] = e.value;
      row["ci"] = e.half_width;
      row["n"] = e.n_samples;
      row["method"] = e.method;
      arr.push_back(row);
    }
    ordered_json j;
    j["rows"] = arr;
    od.text(stem + ".json", j.dump(2) + "\n");
  } else {
    std::string csv = estimate_csv_header();
    csv += '\n';
    for (const auto& [id, e] : rows) {
      csv += estimate_csv_row(id, r.params.q, r.params.p, e);
      csv += '\n';
    }
    od.text(stem + ".csv", csv);
  }
}

void write_part(const OutDir& od, const std::string& stem, const Run& r,
                const std::string& id, const Estimate& est) {
  EstimatePart part;
  part.config = r.ctx.used;
  part.config.erase("replica-base");
  part.config.erase("replicas");
  part.replica_base = r.scfg.replica_base;
  part.replicas = r.scfg.replicas;
  part.id = id;
  part.estimate = est;
  od.text(stem + ".part.json", part_text(part));
}

struct SampleFlags {
  int N = 4;
};

int run_sample(const CLI::App* sc, const CommonFlags& cf,
               const SampleFlags& sf) {
  Run r = resolve_common(sc, cf, {});
  int N = r.ctx.get("--N", sf.N);
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  Region region = build_box(N, r.dim, true);
  System sys = compile_system(region, r.params, r.bc);
  Estimate dens = sample_event_mean(
      sys, r.scfg, [](const System& s, const ExplicitConfig& c) {
        if (s.bonds.empty()) return 0.0;
        return static_cast<double>(c.count_open()) /
               static_cast<double>(s.bonds.size());
      });
  std::vector<ExplicitConfig> last(r.scfg.replicas);
  for_each_replica(r.scfg.exec, r.scfg.replicas, [&](int i) {
    sample_chain(sys, r.scfg, i,
                 [&](const ExplicitConfig& c) { last[i] = c; });
  });
  OutDir od(r.out);
  for (int i = 0; i < r.scfg.replicas; ++i) {
    std::string name =
        "config_r" + std::to_string(r.scfg.replica_base + i) + ".rcfk";
    save_snapshot(od.path(name), sys, last[i]);
  }
  write_table(od, "sample", r, {{"bond_density", dens}});
  write_part(od, "sample", r, "bond_density", dens);
  od.text("manifest.json", manifest_text("sample", r.ctx.used));
  return 0;
}

struct CrossFlags {
  int N = 6;
  double delta = 1.0;
  int L = 0;
};

int run_crossing(const CLI::App* sc, const CommonFlags& cf,
                 const CrossFlags& xf) {
  Run r = resolve_common(sc, cf, {});
  int N = r.ctx.get("--N", xf.N);
  double delta = r.ctx.get("--delta", xf.delta);
  int L = r.ctx.get("--L", xf.L);
  Region region = build_rectangle(N, delta, L, r.dim, true);
  Estimate est = estimate_event(region, r.params, r.bc,
                                EventSpec{EvFaceCross{N, delta}}, r.scfg);
  OutDir od(r.out);
  write_table(od, "crossing", r, {{"face_cross", est}});
  write_part(od, "crossing", r, "face_cross", est);
  od.text("manifest.json", manifest_text("crossing", r.ctx.used));
  return 0;
}

struct TensionFlags {
  int N = 4;
  double delta = 1.0;
  int L = 2;
  std::string mode = "auto";
};

int run_tension(const CLI::App* sc, const CommonFlags& cf,
                const TensionFlags& tf) {
  Run r = resolve_common(sc, cf, {});
  int N = r.ctx.get("--N", tf.N);
  double delta = r.ctx.get("--delta", tf.delta);
  int L = r.ctx.get("--L", tf.L);
  std::string mode_s = r.ctx.get("--mode", tf.mode);
  TensionMode mode = TensionMode::Auto;
  if (mode_s == "direct") {
    mode = TensionMode::Direct;
  } else if (mode_s == "interp") {
    mode = TensionMode::Interpolation;
  } else if (mode_s != "auto") {
    throw std::invalid_argument("mode must be auto, direct or interp");
  }
  TensionResult t = surface_tension_estimate(N, delta, L, r.dim, r.params,
                                             r.bc, r.scfg, mode);
  OutDir od(r.out);
  ordered_json j;
  j["N"] = N;
  j["delta"] = delta;
  j["L"] = L;
  j["infinite"] = t.infinite;
  if (t.infinite) {
    j["tau"] = nullptr;
  } else {
    j["tau"] = t.tau;
    j["lo"] = t.lo;
    j["hi"] = t.hi;
  }
  j["method"] = t.method;
  j["n_samples"] = t.n_samples;
  j["p_hat"] = t.p_hat;
  od.text("tension.json", j.dump(2) + "\n");
  std::string csv = "id,q,p,tau,lo,hi,infinite,method,n\n";
  csv += "tau," + format_double(r.params.q) + "," +
         format_double(r.params.p) + "," + format_double(t.tau) + "," +
         format_double(t.lo) + "," + format_double(t.hi) + "," +
         (t.infinite ? "1" : "0") + "," + csv_escape(t.method) + "," +
         std::to_string(t.n_samples) + "\n";
  od.text("tension.csv", csv);
  od.text("manifest.json", manifest_text("tension", r.ctx.used));
  return 0;
}

struct MixFlags {
  int K = 1;
  double s = 0.0;
};

int run_mixing(const CLI::App* sc, const CommonFlags& cf, const MixFlags& mf) {
  Run r = resolve_common(sc, cf, {.p = true, .bc = false, .chain = true});
  int K = r.ctx.get("--K", mf.K);
  double s = r.ctx.get("--s", mf.s);
  MixingGapResult g = mixing_gap(K, s, r.params.p, r.params.q, r.dim, r.scfg);
  OutDir od(r.out);
  ordered_json j;
  j["K"] = g.K;
  j["s"] = s;
  j["gap"] = g.gap;
  j["half_width"] = g.half_width;
  j["wired"] = est_summary(g.wired);
  j["free"] = est_summary(g.free_bc);
  od.text("mixing.json", j.dump(2) + "\n");
  write_table(od, "mixing", r, {{"wired", g.wired}, {"free", g.free_bc}});
  od.text("manifest.json", manifest_text("mixing", r.ctx.used));
  return 0;
}

struct BlockFlags {
  int L = 2;
  int H = 6;
  double eta = 0.1;
};

int run_blocks(const CLI::App* sc, const CommonFlags& cf,
               const BlockFlags& bf) {
  Run r = resolve_common(sc, cf, {});
  int L = r.ctx.get("--L", bf.L);
  int H = r.ctx.get("--H", bf.H);
  double eta = r.ctx.get("--eta", bf.eta);
  CalibrationResult c =
      calibrate_block(r.params, r.bc, r.dim, L, H, eta, r.scfg);
  OutDir od(r.out);
  ordered_json j;
  j["ok"] = c.ok;
  ordered_json sj;
  sj["d"] = c.spec.d;
  sj["K"] = c.spec.K;
  sj["l"] = c.spec.l;
  sj["h"] = c.spec.h;
  sj["L"] = c.spec.L;
  sj["H"] = c.spec.H;
  sj["eta"] = c.spec.eta;
  sj["N"] = c.spec.N();
  j["spec"] = sj;
  j["occupied"] = est_summary(c.occupied);
  od.text("blocks.json", j.dump(2) + "\n");
  write_table(od, "blocks", r, {{"occupied", c.occupied}});
  od.text("manifest.json", manifest_text("blocks", r.ctx.used));
  return 0;
}

struct RenormFlags {
  int K = 1;
  int ell = 3;
  int height = 9;
  int L = 3;
  int H = 9;
  double eta = 0.1;
  int m = 1;
  int runs = 1;
};

std::uint64_t run_seed(std::uint64_t master, int i) {
  return mix64(master ^ mix64(0x9E3779B97F4A7C15ULL *
                              static_cast<std::uint64_t>(i + 1)));
}

int run_renorm(const CLI::App* sc, const CommonFlags& cf,
               const RenormFlags& rf) {
  Run r = resolve_common(sc, cf, {.p = true, .bc = false, .chain = false});
  if (r.params.q != 1.0) {
    throw std::invalid_argument(
        "renorm growth uses the independent-bond oracle; set q = 1");
  }
  RenormSpec spec;
  spec.d = r.dim;
  spec.K = r.ctx.get("--K", rf.K);
  spec.l = r.ctx.get("--ell", rf.ell);
  spec.h = r.ctx.get("--height", rf.height);
  spec.L = r.ctx.get("--L", rf.L);
  spec.H = r.ctx.get("--H", rf.H);
  spec.eta = r.ctx.get("--eta", rf.eta);
  spec.validate();
  int m = r.ctx.get("--m", rf.m);
  int runs = r.ctx.get("--runs", rf.runs);
  if (m < 0 || runs < 1) throw std::invalid_argument("need m >= 0, runs >= 1");
  std::vector<GrowResult> results(runs);
  for_each_replica(r.scfg.exec, runs, [&](int i) {
    ProductOracle oracle{run_seed(r.scfg.seed, i), r.params.p};
    results[i] = grow_cluster(oracle, spec, m);
  });
  AlphaReport rep = estimate_alpha(results, spec.eta);
  bool verified = true;
  for (int i = 0; i < runs; ++i) {
    ProductOracle oracle{run_seed(r.scfg.seed, i), r.params.p};
    verified = verified && verify_renormalized_path(oracle, results[i]);
  }
  OutDir od(r.out);
  ordered_json j;
  ordered_json sj;
  sj["d"] = spec.d;
  sj["K"] = spec.K;
  sj["l"] = spec.l;
  sj["h"] = spec.h;
  sj["L"] = spec.L;
  sj["H"] = spec.H;
  sj["eta"] = spec.eta;
  sj["N"] = spec.N();
  j["spec"] = sj;
  j["m"] = m;
  j["runs"] = runs;
  ordered_json bricks = ordered_json::array();
  for (const GrowResult& g : results) bricks.push_back(g.bricks_used);
  j["bricks_used"] = bricks;
  ordered_json aj;
  aj["alpha_hat"] = rep.alpha_hat;
  aj["lo"] = rep.lo;
  aj["hi"] = rep.hi;
  aj["inspections"] = rep.inspections;
  aj["sufficient"] = rep.sufficient;
  aj["alpha_eta"] = rep.alpha_eta;
  ordered_json strata = ordered_json::array();
  for (const AlphaStratum& st : rep.strata) {
    ordered_json sjj;
    sjj["good_neighbors"] = st.good_neighbors;
    sjj["trials"] = st.trials;
    sjj["successes"] = st.successes;
    sjj["point"] = st.point;
    sjj["lo"] = st.lo;
    sjj["hi"] = st.hi;
    strata.push_back(sjj);
  }
  aj["strata"] = strata;
  j["alpha"] = aj;
  j["verified"] = verified;
  od.text("renorm.json", j.dump(2) + "\n");
  od.text("witness.json", witness_json(results[0]));
  od.text("witness.svg", witness_svg(results[0]));
  od.text("manifest.json", manifest_text("renorm", r.ctx.used));
  return 0;
}

struct ThreshFlags {
  std::vector<int> Ls;
  int slab_n1 = 16;
  int slab_n2 = 32;
  int box_n1 = 6;
  int box_n2 = 10;
  double p_lo = 0.05;
  double p_hi = 0.95;
  double theta = 0.05;
  int depth = 8;
};

int run_threshold(const CLI::App* sc, const CommonFlags& cf,
                  const ThreshFlags& tf) {
  Run r = resolve_common(sc, cf, {.p = false, .bc = false, .chain = true});
  std::vector<int> Ls = tf.Ls;
  if (Ls.empty()) {
    auto it = r.ctx.file.find("L");
    if (it != r.ctx.file.end()) {
      for (const std::string& tok : split(it->second, ',')) {
        Ls.push_back(parse_value<int>(trim(tok)));
      }
    } else {
      Ls = {1, 2};
    }
  }
  std::string joined;
  for (std::size_t i = 0; i < Ls.size(); ++i) {
    if (i) joined += ',';
    joined += std::to_string(Ls[i]);
  }
  r.ctx.used["L"] = joined;
  int slab_n1 = r.ctx.get("--slab-n1", tf.slab_n1);
  int slab_n2 = r.ctx.get("--slab-n2", tf.slab_n2);
  int box_n1 = r.ctx.get("--box-n1", tf.box_n1);
  int box_n2 = r.ctx.get("--box-n2", tf.box_n2);
  double p_lo = r.ctx.get("--p-lo", tf.p_lo);
  double p_hi = r.ctx.get("--p-hi", tf.p_hi);
  double theta = r.ctx.get("--theta", tf.theta);
  int depth = r.ctx.get("--depth", tf.depth);
  ThresholdReport rep =
      slab_threshold_report(r.dim, r.params.q, Ls, slab_n1, slab_n2, box_n1,
                            box_n2, p_lo, p_hi, r.scfg, theta, depth);
  OutDir od(r.out);
  ordered_json j;
  j["d"] = rep.d;
  j["q"] = rep.q;
  j["theta"] = rep.theta;
  ordered_json bj;
  bj["N1"] = rep.box_N1;
  bj["N2"] = rep.box_N2;
  bj["p_lo"] = rep.box.p_lo;
  bj["p_hi"] = rep.box.p_hi;
  bj["p_hat"] = rep.box.p_hat;
  bj["evals"] = rep.box.evals;
  bj["warning"] = rep.box.warning;
  j["box"] = bj;
  ordered_json slabs = ordered_json::array();
  for (const SlabThresholdResult& s : rep.slabs) {
    ordered_json sj;
    sj["L"] = s.L;
    sj["N1"] = rep.slab_N1;
    sj["N2"] = rep.slab_N2;
    sj["p_lo"] = s.p_lo;
    sj["p_hi"] = s.p_hi;
    sj["p_hat"] = s.p_hat;
    sj["monotone"] = s.monotone;
    sj["warning"] = s.warning;
    ordered_json trace = ordered_json::array();
    for (const SlabProbePoint& pt : s.trace) {
      ordered_json tj;
      tj["p"] = pt.p;
      tj["score1"] = pt.score1;
      tj["score2"] = pt.score2;
      tj["percolating"] = pt.percolating;
      trace.push_back(tj);
    }
    sj["trace"] = trace;
    slabs.push_back(sj);
    std::string csv = "p,score1,score2,percolating\n";
    for (const SlabProbePoint& pt : s.trace) {
      csv += format_double(pt.p) + "," + format_double(pt.score1) + "," +
             format_double(pt.score2) + "," + (pt.percolating ? "1" : "0") +
             "\n";
    }
    od.text("threshold_L" + std::to_string(s.L) + ".csv", csv);
  }
  j["slabs"] = slabs;
  od.text("threshold.json", j.dump(2) + "\n");
  od.text("manifest.json", manifest_text("threshold", r.ctx.used));
  return 0;
}

struct OracleFlags {
  int N = 1;
  std::string exterior = "auto";
};

int run_oracle(const CLI::App* sc, const CommonFlags& cf,
               const OracleFlags& of) {
  Run r = resolve_common(sc, cf, {.p = true, .bc = true, .chain = false});
  int N = r.ctx.get("--N", of.N);
  if (N < 0) throw std::invalid_argument("N must be >= 0");
  std::string ext = r.ctx.get("--exterior", of.exterior);
  bool include_exterior;
  if (ext == "auto") {
    // boundary bonds only matter when the bc touches the exterior; leaving
    // them out keeps the default graph under the enumeration cap
    include_exterior = r.bc.kind != BcKind::Free;
  } else if (ext == "on") {
    include_exterior = true;
  } else if (ext == "off") {
    include_exterior = false;
  } else {
    throw std::invalid_argument("exterior must be auto, on or off");
  }
  Region region = build_box(N, r.dim, include_exterior);
  System sys = compile_system(region, r.params, r.bc);
  ExactFK exact = enumerate_exact(sys);
  std::vector<std::pair<std::int64_t, std::size_t>> order;
  order.reserve(sys.bonds.size());
  for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
    order.emplace_back(sys.bonds[i].region_bid, i);
  }
  std::sort(order.begin(), order.end());
  std::string csv = "bid,p,marginal\n";
  for (const auto& [bid, i] : order) {
    csv += std::to_string(bid) + "," + format_double(sys.bonds[i].p) + "," +
           format_double(exact.bond_marginal(static_cast<std::int64_t>(i))) +
           "\n";
  }
  OutDir od(r.out);
  od.text("oracle.csv", csv);
  ordered_json j;
  j["log_Z"] = exact.log_Z();
  j["n_bonds"] = static_cast<std::int64_t>(sys.bonds.size());
  j["n_nodes"] = sys.n_nodes;
  od.text("oracle.json", j.dump(2) + "\n");
  od.text("manifest.json", manifest_text("oracle", r.ctx.used));
  return 0;
}

int run_merge(const std::vector<std::string>& files, const std::string& out,
              const std::string& format) {
  if (format != "csv" && format != "json") {
    throw std::invalid_argument("format must be csv or json");
  }
  std::vector<EstimatePart> parts;
  parts.reserve(files.size());
  for (const std::string& f : files) {
    parts.push_back(parse_part(read_text_file(f)));
  }
  EstimatePart merged = merge_parts(std::move(parts));
  OutDir od(out);
  od.text("merged.part.json", part_text(merged));
  auto cfg_str = [&](const char* key) {
    auto it = merged.config.find(key);
    return it == merged.config.end() ? std::string() : it->second;
  };
  if (format == "json") {
    ordered_json row;
    row["id"] = merged.id;
    row["q"] = cfg_str("q");
    row["p"] = cfg_str("p");
    row["value"] = merged.estimate.value;
    row["ci"] = merged.estimate.half_width;
    row["n"] = merged.estimate.n_samples;
    row["method"] = merged.estimate.method;
    ordered_json j;
    j["rows"] = ordered_json::array({row});
    od.text("merged.json", j.dump(2) + "\n");
  } else {
    std::string csv = estimate_csv_header();
    csv += '\n';
    csv += csv_escape(merged.id) + "," + cfg_str("q") + "," + cfg_str("p") +
           "," + format_double(merged.estimate.value) + "," +
           format_double(merged.estimate.half_width) + "," +
           std::to_string(merged.estimate.n_samples) + "," +
           csv_escape(merged.estimate.method) + "\n";
    od.text("merged.csv", csv);
  }
  std::map<std::string, std::string> mcfg = merged.config;
  mcfg["replica-base"] = std::to_string(merged.replica_base);
  mcfg["replicas"] = std::to_string(merged.replicas);
  mcfg["parts"] = std::to_string(files.size());
  od.text("manifest.json", manifest_text("merge", mcfg));
  return 0;
}

int run_impl(int argc, const char* const* argv) {
  CLI::App app{"random-cluster percolation laboratory"};
  app.require_subcommand(1);
  std::function<int()> runner;

  CommonFlags cf_sample;
  SampleFlags sf;
  CLI::App* sc_sample = app.add_subcommand(
      "sample", "draw configurations of a box; write snapshots");
  add_common(sc_sample, cf_sample);
  sc_sample->add_option("--N", sf.N, "box radius");
  sc_sample->callback([&] {
    runner = [&] { return run_sample(sc_sample, cf_sample, sf); };
  });

  CommonFlags cf_cross;
  CrossFlags xf;
  CLI::App* sc_cross = app.add_subcommand(
      "crossing", "face-crossing probability of R(N,delta)");
  add_common(sc_cross, cf_cross);
  sc_cross->add_option("--N", xf.N, "rectangle base radius");
  sc_cross->add_option("--delta", xf.delta, "aspect ratio");
  sc_cross->add_option("--L", xf.L, "ambient padding");
  sc_cross->callback([&] {
    runner = [&] { return run_crossing(sc_cross, cf_cross, xf); };
  });

  CommonFlags cf_tension;
  TensionFlags tf;
  CLI::App* sc_tension =
      app.add_subcommand("tension", "surface tension estimate");
  add_common(sc_tension, cf_tension);
  sc_tension->add_option("--N", tf.N, "rectangle base radius");
  sc_tension->add_option("--delta", tf.delta, "aspect ratio");
  sc_tension->add_option("--L", tf.L, "ambient padding");
  sc_tension->add_option("--mode", tf.mode, "auto | direct | interp");
  sc_tension->callback([&] {
    runner = [&] { return run_tension(sc_tension, cf_tension, tf); };
  });

  CommonFlags cf_mix;
  MixFlags mf;
  CLI::App* sc_mix =
      app.add_subcommand("mixing", "wired-free influence gap at the origin");
  add_common(sc_mix, cf_mix);
  sc_mix->add_option("--K", mf.K, "box size");
  sc_mix->add_option("--s", mf.s, "boundary layer intensity");
  sc_mix->callback(
      [&] { runner = [&] { return run_mixing(sc_mix, cf_mix, mf); }; });

  CommonFlags cf_blocks;
  BlockFlags bf;
  CLI::App* sc_blocks =
      app.add_subcommand("blocks", "calibrate an occupied block");
  add_common(sc_blocks, cf_blocks);
  sc_blocks->add_option("--L", bf.L, "lateral budget");
  sc_blocks->add_option("--H", bf.H, "height budget");
  sc_blocks->add_option("--eta", bf.eta, "failure tolerance");
  sc_blocks->callback(
      [&] { runner = [&] { return run_blocks(sc_blocks, cf_blocks, bf); }; });

  CommonFlags cf_renorm;
  RenormFlags rf;
  CLI::App* sc_renorm =
      app.add_subcommand("renorm", "grow a renormalized cluster of squares");
  add_common(sc_renorm, cf_renorm);
  sc_renorm->add_option("--K", rf.K, "seed size");
  sc_renorm->add_option("--ell", rf.ell, "block half-width");
  sc_renorm->add_option("--height", rf.height, "block height");
  sc_renorm->add_option("--L", rf.L, "lateral budget");
  sc_renorm->add_option("--H", rf.H, "height budget");
  sc_renorm->add_option("--eta", rf.eta, "per-block failure tolerance");
  sc_renorm->add_option("--m", rf.m, "domain radius in squares");
  sc_renorm->add_option("--runs", rf.runs, "independent growths");
  sc_renorm->callback([&] {
    runner = [&] { return run_renorm(sc_renorm, cf_renorm, rf); };
  });

  CommonFlags cf_thresh;
  ThreshFlags thf;
  CLI::App* sc_thresh =
      app.add_subcommand("threshold", "slab percolation thresholds");
  add_common(sc_thresh, cf_thresh);
  sc_thresh->add_option("--L", thf.Ls, "slab half-thickness; repeatable");
  sc_thresh->add_option("--slab-n1", thf.slab_n1, "small slab window");
  sc_thresh->add_option("--slab-n2", thf.slab_n2, "large slab window");
  sc_thresh->add_option("--box-n1", thf.box_n1, "small crossing cube");
  sc_thresh->add_option("--box-n2", thf.box_n2, "large crossing cube");
  sc_thresh->add_option("--p-lo", thf.p_lo, "bracket lower end");
  sc_thresh->add_option("--p-hi", thf.p_hi, "bracket upper end");
  sc_thresh->add_option("--theta", thf.theta, "connectivity floor");
  sc_thresh->add_option("--depth", thf.depth, "bisection depth");
  sc_thresh->callback([&] {
    runner = [&] { return run_threshold(sc_thresh, cf_thresh, thf); };
  });

  CommonFlags cf_oracle;
  OracleFlags of;
  CLI::App* sc_oracle =
      app.add_subcommand("oracle", "exact enumeration of a small box");
  add_common(sc_oracle, cf_oracle);
  sc_oracle->add_option("--N", of.N, "box radius");
  sc_oracle->add_option("--exterior", of.exterior,
                        "boundary bonds: auto | on | off");
  sc_oracle->callback([&] {
    runner = [&] { return run_oracle(sc_oracle, cf_oracle, of); };
  });

  std::vector<std::string> merge_files;
  std::string merge_out = ".";
  std::string merge_format = "csv";
  CLI::App* sc_merge =
      app.add_subcommand("merge", "pool partial estimate files");
  sc_merge->add_option("files", merge_files, "estimate part files")
      ->required();
  sc_merge->add_option("--out", merge_out, "output directory");
  sc_merge->add_option("--format", merge_format, "csv | json");
  sc_merge->callback([&] {
    runner = [&] { return run_merge(merge_files, merge_out, merge_format); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    print_error(e.what(), 2);
    return 2;
  }
  if (!runner) {
    print_error("no subcommand selected", 2);
    return 2;
  }
  return runner();
}

}  // namespace

BoundaryCondition parse_bc(const std::string& s, int d) {
  if (s == "free") return BoundaryCondition::free();
  if (s == "wired") return BoundaryCondition::wired();
  if (s.rfind("mixed:", 0) == 0) {
    std::vector<std::vector<Coord>> classes;
    for (const std::string& cls_str : split(s.substr(6), ';')) {
      std::vector<Coord> cls;
      for (const std::string& site_str : split(cls_str, '+')) {
        std::vector<std::string> parts = split(site_str, ',');
        if (static_cast<int>(parts.size()) != d) {
          throw std::invalid_argument("bc site needs exactly " +
                                      std::to_string(d) + " coordinates");
        }
        Coord c{};
        for (int a = 0; a < d; ++a) {
          c[a] = parse_value<int>(trim(parts[a]));
        }
        cls.push_back(c);
      }
      if (cls.empty()) throw std::invalid_argument("empty bc class");
      classes.push_back(std::move(cls));
    }
    if (classes.empty()) throw std::invalid_argument("empty bc class list");
    return BoundaryCondition::mixed(std::move(classes));
  }
  throw std::invalid_argument("unrecognized bc: " + s);
}

std::map<std::string, std::string> parse_config_file(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out[key] = value;
  }
  return out;
}

int run_cli(int argc, const char* const* argv) {
  try {
    return run_impl(argc, argv);
  } catch (const oracle_cap_error& e) {
    print_error(e.what(), 3);
    return 3;
  } catch (const estimator_failure& e) {
    print_error(e.what(), 4);
    return 4;
  } catch (const std::exception& e) {
    print_error(e.what(), 2);
    return 2;
  }
}

}  // namespace rclab
