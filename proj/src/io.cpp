#include "rclab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rclab {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string estimate_csv_header() { return "id,q,p,value,ci,n,method"; }

std::string estimate_csv_row(const std::string& id, double q, double p,
                             const Estimate& est) {
  std::string row = csv_escape(id);
  row += ',';
  row += format_double(q);
  row += ',';
  row += format_double(p);
  row += ',';
  row += format_double(est.value);
  row += ',';
  row += format_double(est.half_width);
  row += ',';
  row += std::to_string(est.n_samples);
  row += ',';
  row += csv_escape(est.method);
  return row;
}

std::string manifest_text(const std::string& subcommand,
                          const std::map<std::string, std::string>& config) {
  ordered_json j;
  j["tool"] = "rclab";
  j["code_version"] = kCodeVersion;
  j["subcommand"] = subcommand;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

namespace {

ordered_json estimate_json(const Estimate& est) {
  ordered_json j;
  j["value"] = est.value;
  j["half_width"] = est.half_width;
  j["n_samples"] = est.n_samples;
  j["batches"] = est.batches;
  j["method"] = est.method;
  j["batch_means"] = est.batch_means;
  return j;
}

Estimate estimate_from_json(const nlohmann::json& j) {
  Estimate est;
  est.value = j.at("value").get<double>();
  est.half_width = j.at("half_width").get<double>();
  est.n_samples = j.at("n_samples").get<std::int64_t>();
  est.batches = j.at("batches").get<int>();
  est.method = j.at("method").get<std::string>();
  est.batch_means = j.at("batch_means").get<std::vector<double>>();
  return est;
}

}  // namespace

std::string part_text(const EstimatePart& part) {
  ordered_json j;
  j["kind"] = "estimate-part";
  j["code_version"] = kCodeVersion;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : part.config) cfg[k] = v;
  j["config"] = cfg;
  j["replica_base"] = part.replica_base;
  j["replicas"] = part.replicas;
  j["id"] = part.id;
  j["estimate"] = estimate_json(part.estimate);
  return j.dump(2) + "\n";
}

EstimatePart parse_part(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("kind", "") != "estimate-part") {
    throw std::runtime_error("not an estimate-part file");
  }
  EstimatePart part;
  for (const auto& [k, v] : j.at("config").items()) {
    part.config[k] = v.get<std::string>();
  }
  part.replica_base = j.at("replica_base").get<int>();
  part.replicas = j.at("replicas").get<int>();
  part.id = j.at("id").get<std::string>();
  part.estimate = estimate_from_json(j.at("estimate"));
  return part;
}

EstimatePart merge_parts(std::vector<EstimatePart> parts) {
  if (parts.empty()) throw std::runtime_error("nothing to merge");
  std::sort(parts.begin(), parts.end(),
            [](const EstimatePart& a, const EstimatePart& b) {
              return a.replica_base < b.replica_base;
            });
  const EstimatePart& first = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const EstimatePart& p = parts[i];
    if (p.config != first.config || p.id != first.id) {
      throw std::runtime_error("part configs differ; refusing to merge");
    }
    const EstimatePart& prev = parts[i - 1];
    if (p.replica_base < prev.replica_base + prev.replicas) {
      throw std::runtime_error("replica windows overlap; refusing to merge");
    }
  }
  EstimatePart out;
  out.config = first.config;
  out.id = first.id;
  out.replica_base = first.replica_base;
  out.replicas = 0;
  std::string method = first.estimate.method;
  std::vector<Estimate> ests;
  ests.reserve(parts.size());
  for (EstimatePart& p : parts) {
    out.replicas += p.replicas;
    ests.push_back(std::move(p.estimate));
  }
  out.estimate = merge_estimates(ests, std::move(method));
  return out;
}

namespace {

constexpr char kMagic[4] = {'R', 'C', 'F', 'K'};
constexpr std::uint32_t kSnapshotVersion = 1;

struct ByteWriter {
  std::string buf;

  void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
};

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos >= buf.size()) throw std::runtime_error("truncated snapshot");
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{u8()} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{u8()} << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
};

void put_coord(ByteWriter& w, const Coord& c, int d) {
  for (int a = 0; a < d; ++a) w.i32(c[a]);
}

Coord get_coord(ByteReader& r, int d) {
  Coord c{};
  for (int a = 0; a < d; ++a) c[a] = r.i32();
  return c;
}

}  // namespace

void save_snapshot(const std::string& path, const System& sys,
                   const ExplicitConfig& cfg) {
  const Region& region = sys.region;
  int d = region.dim();
  ByteWriter w;
  w.buf.append(kMagic, 4);
  w.u32(kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(d));
  w.u8(static_cast<std::uint8_t>(region.kind()));
  w.u8(region.include_exterior() ? 1 : 0);
  w.i32(region.plaque_axis());
  put_coord(w, region.lo(), d);
  put_coord(w, region.hi(), d);
  if (region.kind() == RegionKind::Custom) {
    w.u64(static_cast<std::uint64_t>(region.n_vertices()));
    for (std::int64_t i = 0; i < region.n_vertices(); ++i) {
      put_coord(w, region.vertex_at(i), d);
    }
  }
  w.u8(static_cast<std::uint8_t>(sys.bc.kind));
  if (sys.bc.kind == BcKind::Mixed) {
    w.u64(sys.bc.classes.size());
    for (const auto& cls : sys.bc.classes) {
      w.u64(cls.size());
      for (const Coord& c : cls) put_coord(w, c, d);
    }
  }
  w.f64(sys.params.q);
  w.f64(sys.params.p);
  w.u64(sys.params.overrides.size());
  for (const auto& [bid, value] : sys.params.overrides) {
    w.i64(bid);
    w.f64(value);
  }
  std::int64_t nb = region.n_bonds();
  w.u64(static_cast<std::uint64_t>(nb));
  std::string bits((static_cast<std::size_t>(nb) + 7) / 8, '\0');
  for (std::int64_t bid = 0; bid < nb; ++bid) {
    std::int64_t sb = sys.sbond_index(bid);
    if (sb >= 0 && cfg.open(sb)) {
      bits[static_cast<std::size_t>(bid >> 3)] |=
          static_cast<char>(1 << (bid & 7));
    }
  }
  w.buf += bits;
  write_text_file(path, w.buf);
}

LoadedSnapshot load_snapshot(const std::string& path) {
  std::string data = read_text_file(path);
  ByteReader r{data};
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw std::runtime_error("bad snapshot magic: " + path);
  }
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) {
    throw std::runtime_error("unsupported snapshot version " +
                             std::to_string(version));
  }
  int d = static_cast<int>(r.u32());
  if (d < 1 || d > kMaxDim) throw std::runtime_error("bad snapshot dimension");
  auto kind = static_cast<RegionKind>(r.u8());
  bool include_exterior = r.u8() != 0;
  int plaque_axis = r.i32();
  Coord lo = get_coord(r, d);
  Coord hi = get_coord(r, d);
  Region region;
  if (kind == RegionKind::Custom) {
    std::uint64_t nv = r.u64();
    std::vector<Coord> vertices;
    vertices.reserve(nv);
    for (std::uint64_t i = 0; i < nv; ++i) vertices.push_back(get_coord(r, d));
    region = Region::custom(d, std::move(vertices), include_exterior);
  } else {
    region = Region::box(d, lo, hi, kind, include_exterior, plaque_axis);
  }
  auto bck = static_cast<BcKind>(r.u8());
  BoundaryCondition bc;
  if (bck == BcKind::Wired) {
    bc = BoundaryCondition::wired();
  } else if (bck == BcKind::Mixed) {
    std::uint64_t ncls = r.u64();
    std::vector<std::vector<Coord>> classes(ncls);
    for (auto& cls : classes) {
      std::uint64_t n = r.u64();
      cls.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) cls.push_back(get_coord(r, d));
    }
    bc = BoundaryCondition::mixed(std::move(classes));
  }
  RcParams params;
  params.q = r.f64();
  params.p = r.f64();
  std::uint64_t nov = r.u64();
  for (std::uint64_t i = 0; i < nov; ++i) {
    std::int64_t bid = r.i64();
    double value = r.f64();
    params.set_override(bid, value);
  }
  std::int64_t nb = static_cast<std::int64_t>(r.u64());
  LoadedSnapshot out{compile_system(region, params, bc), ExplicitConfig{}};
  if (nb != out.sys.region.n_bonds()) {
    throw std::runtime_error("snapshot bond count disagrees with the region");
  }
  std::size_t nbytes = (static_cast<std::size_t>(nb) + 7) / 8;
  if (data.size() - r.pos < nbytes) {
    throw std::runtime_error("truncated snapshot");
  }
  out.cfg = ExplicitConfig(static_cast<std::int64_t>(out.sys.bonds.size()));
  for (std::int64_t bid = 0; bid < nb; ++bid) {
    bool open = (data[r.pos + static_cast<std::size_t>(bid >> 3)] >>
                 (bid & 7)) &
                1;
    if (!open) continue;
    std::int64_t sb = out.sys.sbond_index(bid);
    if (sb >= 0) out.cfg.set_open(sb, true);
  }
  return out;
}

}  // namespace rclab
