#include "feel/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "feel/error.hpp"

namespace feel::config {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// "section.key" -> line number, for diagnostics.
std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream in(text);
  std::string line, section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      out.emplace(section, n);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    out.emplace(section + "." + trim(t.substr(0, eq)), n);
  }
  return out;
}

struct Where {
  std::string source;
  int line = 0;
  std::string section, key;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(line) + ": [" + section + "] " +
                      key + ": " + what);
  }
};

double to_number(const std::string& v, const Where& w) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  w.fail("expected a number, got '" + v + "'");
}

std::uint64_t to_count(const std::string& v, const Where& w) {
  const double x = to_number(v, w);
  if (x < 0.0 || x != std::floor(x) || x > 9007199254740992.0) {
    w.fail("expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& v, const Where& w) {
  const std::string s = lower(v);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  w.fail("expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& v, const Where& w) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(to_number(trim(item), w));
  if (out.empty()) w.fail("expected a comma-separated list of numbers");
  return out;
}

using Setter = std::function<void(const std::string&, const Where&)>;
using Schema = std::map<std::string, std::map<std::string, Setter>>;

struct GpuLists {
  std::vector<double> flat_ms, slope_ms, threshold, flops;
};

struct RateLists {
  std::vector<double> up_mbps, down_mbps;
};

Schema schema(Config& c, GpuLists& gpu, RateLists& rates) {
  sim::ScenarioConfig& s = c.scenario;
  auto num = [](double& field) {
    return [&field](const std::string& v, const Where& w) { field = to_number(v, w); };
  };
  auto scaled = [](double& field, double factor) {
    return [&field, factor](const std::string& v, const Where& w) {
      field = to_number(v, w) * factor;
    };
  };
  auto flag = [](bool& field) {
    return [&field](const std::string& v, const Where& w) { field = to_bool(v, w); };
  };
  auto list = [](std::vector<double>& field) {
    return [&field](const std::string& v, const Where& w) { field = to_list(v, w); };
  };

  Schema m;
  m["scenario"] = {
      {"mode",
       [&s](const std::string& v, const Where& w) {
         const std::string x = lower(v);
         if (x == "cpu") s.mode = sim::Mode::Cpu;
         else if (x == "gpu") s.mode = sim::Mode::Gpu;
         else w.fail("expected cpu or gpu, got '" + v + "'");
       }},
      {"devices",
       [&s](const std::string& v, const Where& w) { s.device_count = to_count(v, w); }},
      {"rounds", [&s](const std::string& v, const Where& w) { s.rounds = to_count(v, w); }},
      {"trials", [&s](const std::string& v, const Where& w) { s.trials = to_count(v, w); }},
      {"seed",
       [&s](const std::string& v, const Where& w) { s.master_seed = to_count(v, w); }},
      {"threads",
       [&s](const std::string& v, const Where& w) {
         s.threads = static_cast<unsigned>(to_count(v, w));
       }},
      {"cell_radius_km", num(s.cell_radius_km)},
      {"min_distance_km", num(s.min_distance_km)},
      {"uplink_power_dbm", num(s.uplink_power_dbm)},
      {"downlink_power_dbm", num(s.downlink_power_dbm)},
      {"static_channel", flag(s.static_channel)},
      {"round_fading_samples",
       [&s](const std::string& v, const Where& w) {
         s.round_fading_samples = to_count(v, w);
       }},
      {"target_reduction", num(s.target_reduction)},
      {"stop_at_target", flag(s.stop_at_target)},
      {"integer_frames", flag(s.integer_frames)},
  };
  m["channel"] = {
      {"bandwidth_hz", num(s.channel.bandwidth_hz)},
      {"noise_density_dbm_per_hz", num(s.channel.noise_density_dbm_per_hz)},
      {"pathloss_intercept_db", num(s.channel.pathloss_intercept_db)},
      {"pathloss_slope_db_per_decade", num(s.channel.pathloss_slope)},
      {"fading_variance", num(s.channel.fading_variance)},
      {"mc_samples",
       [&s](const std::string& v, const Where& w) { s.channel.mc_samples = to_count(v, w); }},
      {"deterministic_fading", flag(s.channel.deterministic_fading)},
  };
  m["model"] = {
      {"param_count", num(s.cost.param_count)},
      {"bits_per_element", num(s.cost.bits_per_element)},
      {"cycles_per_sample", num(s.cost.cycles_per_sample)},
      {"update_cycles", num(s.cost.update_cycles)},
      {"update_flops", num(s.cost.update_flops)},
      {"max_batch", num(s.max_batch)},
  };
  m["loss"] = {
      {"xi", num(s.cost.loss_coefficient)},
      {"initial_loss", num(s.initial_loss)},
      {"floor_loss", num(s.floor_loss)},
      {"noise", num(s.loss_noise)},
  };
  m["frames"] = {
      {"uplink_ms", scaled(s.frames.uplink_s, 1e-3)},
      {"downlink_ms", scaled(s.frames.downlink_s, 1e-3)},
  };
  m["fleet"] = {
      {"cpu_freq_ghz",
       [&s](const std::string& v, const Where& w) {
         s.cpu_freq_mix_hz = to_list(v, w);
         for (double& f : s.cpu_freq_mix_hz) f *= 1e9;
       }},
      {"gpu_flat_latency_ms", list(gpu.flat_ms)},
      {"gpu_slope_ms_per_sample", list(gpu.slope_ms)},
      {"gpu_threshold_batch", list(gpu.threshold)},
      {"gpu_flops", list(gpu.flops)},
      {"distances_km", list(s.distances_km)},
      {"uplink_rate_mbps", list(rates.up_mbps)},
      {"downlink_rate_mbps", list(rates.down_mbps)},
      {"downlink_broadcast",
       [](const std::string& v, const Where& w) {
         if (to_bool(v, w)) {
           w.fail("broadcast downlink is not supported; the downlink is "
                  "scheduled per device");
         }
       }},
  };
  m["solver"] = {
      {"time_tolerance_s", num(s.solve.tol.time_s)},
      {"batch_tolerance", num(s.solve.tol.batch)},
      {"rounding",
       [&s](const std::string& v, const Where& w) {
         const std::string x = lower(v);
         if (x == "integer") s.solve.rounding = BatchRounding::Integer;
         else if (x == "continuous") s.solve.rounding = BatchRounding::Continuous;
         else w.fail("expected integer or continuous, got '" + v + "'");
       }},
  };
  m["baselines"] = {
      {"slots",
       [&s](const std::string& v, const Where& w) {
         const std::string x = lower(v);
         if (x == "optimal") s.baseline_slots = SlotPolicy::Optimal;
         else if (x == "equal") s.baseline_slots = SlotPolicy::Equal;
         else w.fail("expected optimal or equal, got '" + v + "'");
       }},
      {"reference",
       [&s](const std::string& v, const Where& w) {
         try {
           s.reference = sim::parse_scheme(v);
         } catch (const InvalidArgument& e) {
           w.fail(e.what());
         }
       }},
  };
  m["output"] = {
      {"rounds_csv", [&c](const std::string& v, const Where&) { c.output.rounds_csv = v; }},
      {"summary_json",
       [&c](const std::string& v, const Where&) { c.output.summary_json = v; }},
      {"plan_json", [&c](const std::string& v, const Where&) { c.output.plan_json = v; }},
  };
  return m;
}

// Lists of length 1 apply to every mix entry.
double pick(const std::vector<double>& v, std::size_t i, double fallback) {
  if (v.empty()) return fallback;
  return v.size() == 1 ? v[0] : v[i];
}

void finish(Config& c, const GpuLists& gpu, const RateLists& rates,
            const std::string& source) {
  sim::ScenarioConfig& s = c.scenario;
  std::size_t n = 0;
  for (const auto* v : {&gpu.flat_ms, &gpu.slope_ms, &gpu.threshold, &gpu.flops}) {
    if (v->size() > 1) {
      if (n > 1 && v->size() != n) {
        throw ConfigError(source + ": [fleet] gpu_* lists differ in length");
      }
      n = v->size();
    }
  }
  if (n > 0 || !gpu.flat_ms.empty() || !gpu.slope_ms.empty() ||
      !gpu.threshold.empty() || !gpu.flops.empty()) {
    const latency::GpuProfile def;
    s.gpu_mix.clear();
    for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) {
      latency::GpuProfile g;
      g.flat_latency_s = pick(gpu.flat_ms, i, def.flat_latency_s * 1e3) * 1e-3;
      g.slope_s_per_sample = pick(gpu.slope_ms, i, def.slope_s_per_sample * 1e3) * 1e-3;
      g.threshold_batch = pick(gpu.threshold, i, def.threshold_batch);
      g.gpu_flops = pick(gpu.flops, i, def.gpu_flops);
      s.gpu_mix.push_back(g);
    }
  }
  if (rates.up_mbps.empty() != rates.down_mbps.empty()) {
    throw ConfigError(source + ": [fleet] uplink_rate_mbps and downlink_rate_mbps "
                               "must be given together");
  }
  if (!rates.up_mbps.empty()) {
    if (rates.up_mbps.size() != rates.down_mbps.size()) {
      throw ConfigError(source + ": [fleet] rate lists differ in length");
    }
    s.rate_override.clear();
    for (std::size_t i = 0; i < rates.up_mbps.size(); ++i) {
      s.rate_override.push_back({rates.up_mbps[i] * 1e6, rates.down_mbps[i] * 1e6});
    }
  }
  try {
    sim::validate(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

}  // namespace

Config parse(std::istream& in, const std::string& source) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  const auto lines = key_lines(text);
  auto line_of = [&](const std::string& k) {
    const auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  };

  Config c;
  GpuLists gpu;
  RateLists rates;
  const Schema sch = schema(c, gpu, rates);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(source + ":" + std::to_string(line_of("." + section)) +
                        ": key '" + section + "' is outside any section");
    }
    const auto sec = sch.find(section);
    if (sec == sch.end()) {
      throw ConfigError(source + ":" + std::to_string(line_of(section)) +
                        ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      Where w{source, line_of(section + "." + key), section, key};
      const auto it = sec->second.find(key);
      if (it == sec->second.end()) w.fail("unknown key");
      it->second(trim(value.data()), w);
    }
  }
  finish(c, gpu, rates, source);
  return c;
}

Config load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse(in, path);
}

}  // namespace feel::config
