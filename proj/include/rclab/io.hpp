#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rclab/estimate.hpp"
#include "rclab/rcmodel.hpp"

namespace rclab {

inline constexpr const char* kCodeVersion = "0.1.0";

// Shortest decimal that round-trips. Artifacts must be byte-stable across
// runs and worker counts, so all doubles go through this.
std::string format_double(double v);

std::string csv_escape(const std::string& s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// One estimate as a CSV row. ci is the half-width of the 95% interval.
std::string estimate_csv_header();
std::string estimate_csv_row(const std::string& id, double q, double p,
                             const Estimate& est);

// Manifest carried next to every artifact: subcommand, the full flat config
// including the master seed, and the code version. Deliberately free of
// timestamps and machine facts so a rerun reproduces it byte for byte.
std::string manifest_text(const std::string& subcommand,
                          const std::map<std::string, std::string>& config);

// Partial result file: one estimate measured by one replica window of an
// experiment. Parts with matching configs pool into the estimate a single
// multi-replica run would have produced.
struct EstimatePart {
  std::map<std::string, std::string> config;
  int replica_base = 0;
  int replicas = 1;
  std::string id;
  Estimate estimate;
};

std::string part_text(const EstimatePart& part);
EstimatePart parse_part(const std::string& text);

// Pools parts by concatenating batch means in replica order, so the output
// is independent of argument order. Configs and ids must match exactly and
// replica windows must not overlap.
EstimatePart merge_parts(std::vector<EstimatePart> parts);

// Versioned little-endian snapshot: magic, header (dimension, region
// descriptor, boundary classes, q, p, overrides), then bond bits packed by
// region bond id.
void save_snapshot(const std::string& path, const System& sys,
                   const ExplicitConfig& cfg);

struct LoadedSnapshot {
  System sys;
  ExplicitConfig cfg;
};

LoadedSnapshot load_snapshot(const std::string& path);

}  // namespace rclab
