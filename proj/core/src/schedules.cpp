#include "pcv2/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace pcv2 {

std::vector<std::size_t> MaskSchedule::cumulative_counts() const {
  std::vector<std::size_t> out;
  std::size_t c = 0;
  for (const auto& g : groups) {
    c += g.size();
    out.push_back(c);
  }
  return out;
}

namespace {

void check_dims(int h, int w) {
  require(h >= 1 && w >= 1, "schedule: dims must be >= 1, got ", h, "x", w);
  require(h <= 0xFFFF && w <= 0xFFFF, "schedule: dims exceed u16 range");
}

}  // namespace

MaskSchedule checkerboard_schedule(int h, int w) {
  check_dims(h, w);
  MaskSchedule s;
  s.h = h;
  s.w = w;
  s.params.kind = ScheduleKind::kCheckerboard;
  std::vector<u32> even, odd;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      ((i + j) % 2 == 0 ? even : odd).push_back(static_cast<u32>(i * w + j));
    }
  }
  s.groups.push_back(std::move(even));
  if (!odd.empty()) s.groups.push_back(std::move(odd));
  return s;
}

MaskSchedule quincunx_schedule(int h, int w) {
  check_dims(h, w);
  require(h % 4 == 0 && w % 4 == 0, "quincunx: dims must be multiples of 4, got ", h, "x", w);
  MaskSchedule s;
  s.h = h;
  s.w = w;
  s.params.kind = ScheduleKind::kQuincunx;
  std::vector<std::vector<u32>> groups(5);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      int g;
      if (i % 4 == 0 && j % 4 == 0) {
        g = 0;
      } else if (i % 4 == 2 && j % 4 == 2) {
        g = 1;
      } else if (i % 2 == 0 && j % 2 == 0) {
        g = 2;
      } else if (i % 2 == 1 && j % 2 == 1) {
        g = 3;
      } else {
        g = 4;
      }
      groups[g].push_back(static_cast<u32>(i * w + j));
    }
  }
  s.groups = std::move(groups);
  return s;
}

std::vector<std::size_t> qlds_cumulative(std::size_t n, double alpha, int steps) {
  require(steps >= 1, "qlds: S must be >= 1");
  require(static_cast<std::size_t>(steps) <= n, "qlds: S=", steps, " exceeds position count ", n);
  require(alpha > 0.0, "qlds: alpha must be positive");
  std::vector<std::size_t> cum(steps);
  std::size_t prev = 0;
  for (int i = 1; i <= steps; ++i) {
    double frac = std::pow(static_cast<double>(i) / static_cast<double>(steps), alpha);
    auto target = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * frac));
    // Force strict growth and leave room for the remaining groups.
    std::size_t lo = prev + 1;
    std::size_t hi = n - static_cast<std::size_t>(steps - i);
    cum[i - 1] = std::clamp(target, lo, hi);
    prev = cum[i - 1];
  }
  cum[steps - 1] = n;
  return cum;
}

namespace {

// 2-D R-sequence over the plastic constant: u_t = fract(t * (1/rho, 1/rho^2)).
// Each point claims the nearest unclaimed cell (ties by raster order), which
// yields a deterministic low-discrepancy visiting order of the grid.
std::vector<u32> r_sequence_order(int h, int w) {
  constexpr double kPlastic = 1.32471795724474602596;
  const double a1 = 1.0 / kPlastic;
  const double a2 = 1.0 / (kPlastic * kPlastic);
  const std::size_t n = static_cast<std::size_t>(h) * w;

  std::vector<u32> order;
  order.reserve(n);
  std::vector<bool> claimed(n, false);
  for (std::size_t t = 0; t < n; ++t) {
    double ui = std::fmod(static_cast<double>(t) * a1, 1.0);
    double uj = std::fmod(static_cast<double>(t) * a2, 1.0);
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (int i = 0; i < h; ++i) {
      double di = ui - (i + 0.5) / h;
      for (int j = 0; j < w; ++j) {
        std::size_t flat = static_cast<std::size_t>(i) * w + j;
        if (claimed[flat]) continue;
        double dj = uj - (j + 0.5) / w;
        double d = di * di + dj * dj;
        if (d < best_d) {
          best_d = d;
          best = flat;
        }
      }
    }
    claimed[best] = true;
    order.push_back(static_cast<u32>(best));
  }
  return order;
}

}  // namespace

MaskSchedule qlds_schedule(int h, int w, double alpha, int steps) {
  check_dims(h, w);
  // Narrow first: the header stores alpha as f32 and the rebuilt schedule
  // must match this one exactly.
  float alpha32 = static_cast<float>(alpha);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  auto cum = qlds_cumulative(n, static_cast<double>(alpha32), steps);
  auto order = r_sequence_order(h, w);

  MaskSchedule s;
  s.h = h;
  s.w = w;
  s.params.kind = ScheduleKind::kQlds;
  s.params.alpha = alpha32;
  s.params.steps = static_cast<u16>(steps);
  std::size_t start = 0;
  for (std::size_t c : cum) {
    s.groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(c));
    start = c;
  }
  return s;
}

namespace {

std::vector<int> axis_lattice(int scale, int n) {
  std::vector<int> idx(scale);
  for (int t = 0; t < scale; ++t) {
    idx[t] = static_cast<int>((static_cast<i64>(t) * n) / scale);
  }
  return idx;
}

}  // namespace

MaskSchedule implicit_var_schedule(int h, int w, std::vector<ScalePair> scales) {
  check_dims(h, w);
  require(!scales.empty(), "implicit_var: at least one scale required");
  require(scales.back().rows == h && scales.back().cols == w,
          "implicit_var: last scale pair must equal grid dims ", h, "x", w);
  for (std::size_t k = 0; k < scales.size(); ++k) {
    require(scales[k].rows >= 1 && scales[k].cols >= 1, "implicit_var: scale ", k + 1,
            " has a zero axis");
    require(scales[k].rows <= h && scales[k].cols <= w, "implicit_var: scale ", k + 1,
            " exceeds grid dims");
    if (k > 0) {
      require(scales[k].rows > scales[k - 1].rows || scales[k].cols > scales[k - 1].cols,
              "implicit_var: scales must be strictly increasing at scale ", k + 1);
      require(scales[k].rows >= scales[k - 1].rows && scales[k].cols >= scales[k - 1].cols,
              "implicit_var: scales must be nondecreasing per axis at scale ", k + 1);
    }
  }

  // Per-axis lattices must be nested or encoder and decoder could disagree
  // about which positions a coarser scale already revealed.
  auto check_nested = [](const std::vector<int>& prev, const std::vector<int>& cur,
                         const char* axis, std::size_t k) {
    std::set<int> cur_set(cur.begin(), cur.end());
    for (int v : prev) {
      require(cur_set.count(v) != 0, "implicit_var: ", axis, " lattice of scale ", k,
              " is not nested in scale ", k + 1, " (index ", v, " disappears)");
    }
  };
  std::vector<std::vector<int>> row_idx, col_idx;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    row_idx.push_back(axis_lattice(scales[k].rows, h));
    col_idx.push_back(axis_lattice(scales[k].cols, w));
    if (k > 0) {
      check_nested(row_idx[k - 1], row_idx[k], "row", k);
      check_nested(col_idx[k - 1], col_idx[k], "col", k);
    }
  }

  MaskSchedule s;
  s.h = h;
  s.w = w;
  s.params.kind = ScheduleKind::kImplicitVar;
  s.params.scales = scales;
  std::vector<bool> revealed(static_cast<std::size_t>(h) * w, false);
  for (std::size_t k = 0; k < scales.size(); ++k) {
    std::vector<u32> group;
    for (int i : row_idx[k]) {
      for (int j : col_idx[k]) {
        std::size_t flat = static_cast<std::size_t>(i) * w + j;
        if (!revealed[flat]) {
          revealed[flat] = true;
          group.push_back(static_cast<u32>(flat));
        }
      }
    }
    require(!group.empty(), "implicit_var: scale ", k + 1, " reveals no new positions");
    s.groups.push_back(std::move(group));
  }
  return s;
}

MaskSchedule implicit_var_schedule(int h, int w, const std::vector<int>& square_scales) {
  std::vector<ScalePair> pairs;
  pairs.reserve(square_scales.size());
  for (int v : square_scales) {
    require(v >= 1 && v <= 0xFFFF, "implicit_var: scale out of range: ", v);
    pairs.push_back({static_cast<u16>(v), static_cast<u16>(v)});
  }
  return implicit_var_schedule(h, w, std::move(pairs));
}

std::vector<std::string> validate_schedule(const MaskSchedule& s) {
  std::vector<std::string> violations;
  if (s.h < 1 || s.w < 1) {
    violations.push_back(cat("bad dims ", s.h, "x", s.w));
    return violations;
  }
  const std::size_t n = s.positions();
  std::vector<int> seen(n, -1);
  for (std::size_t k = 0; k < s.groups.size(); ++k) {
    if (s.groups[k].empty()) violations.push_back(cat("group ", k + 1, " is empty"));
    for (u32 flat : s.groups[k]) {
      if (flat >= n) {
        violations.push_back(cat("position ", flat, " in group ", k + 1, " is out of bounds"));
        continue;
      }
      if (seen[flat] >= 0) {
        violations.push_back(cat("overlap at (", flat / s.w, ",", flat % s.w, "): groups ",
                                 seen[flat] + 1, " and ", k + 1));
      }
      seen[flat] = static_cast<int>(k);
    }
  }
  for (std::size_t flat = 0; flat < n; ++flat) {
    if (seen[flat] < 0) {
      violations.push_back(cat("position (", flat / s.w, ",", flat % s.w, ") not covered"));
    }
  }
  // Determinism: the serialized parameters must rebuild this exact schedule.
  if (violations.empty()) {
    try {
      MaskSchedule rebuilt = build_schedule(s.h, s.w, s.params);
      if (!(rebuilt == s)) violations.push_back("rebuild from params differs from schedule");
    } catch (const Error& e) {
      violations.push_back(cat("rebuild from params failed: ", e.what()));
    }
  }
  return violations;
}

void write_schedule_params(ByteWriter& w, const ScheduleParams& p) {
  w.put_u8(static_cast<u8>(p.kind));
  switch (p.kind) {
    case ScheduleKind::kCheckerboard:
    case ScheduleKind::kQuincunx:
      break;
    case ScheduleKind::kQlds:
      w.put_f32(p.alpha);
      w.put_u16(p.steps);
      break;
    case ScheduleKind::kImplicitVar:
      require(p.scales.size() <= 255, "schedule params: too many scales");
      w.put_u8(static_cast<u8>(p.scales.size()));
      for (const auto& sc : p.scales) {
        w.put_u16(sc.rows);
        w.put_u16(sc.cols);
      }
      break;
  }
}

ScheduleParams read_schedule_params(ByteReader& r) {
  ScheduleParams p;
  u8 kind = r.get_u8();
  require(kind <= 3, "schedule params: unknown kind byte ", static_cast<int>(kind));
  p.kind = static_cast<ScheduleKind>(kind);
  switch (p.kind) {
    case ScheduleKind::kCheckerboard:
    case ScheduleKind::kQuincunx:
      break;
    case ScheduleKind::kQlds:
      p.alpha = r.get_f32();
      p.steps = r.get_u16();
      break;
    case ScheduleKind::kImplicitVar: {
      u8 count = r.get_u8();
      for (u8 i = 0; i < count; ++i) {
        ScalePair sc;
        sc.rows = r.get_u16();
        sc.cols = r.get_u16();
        p.scales.push_back(sc);
      }
      break;
    }
  }
  return p;
}

MaskSchedule build_schedule(int h, int w, const ScheduleParams& p) {
  switch (p.kind) {
    case ScheduleKind::kCheckerboard:
      return checkerboard_schedule(h, w);
    case ScheduleKind::kQuincunx:
      return quincunx_schedule(h, w);
    case ScheduleKind::kQlds:
      return qlds_schedule(h, w, static_cast<double>(p.alpha), p.steps);
    case ScheduleKind::kImplicitVar:
      return implicit_var_schedule(h, w, p.scales);
  }
  fail("build_schedule: unreachable kind");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

ScheduleParams parse_schedule_spec(const std::string& spec) {
  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);

  ScheduleParams p;
  if (name == "checkerboard") {
    p.kind = ScheduleKind::kCheckerboard;
    require(args.empty(), "schedule spec: checkerboard takes no parameters");
    return p;
  }
  if (name == "quincunx") {
    p.kind = ScheduleKind::kQuincunx;
    require(args.empty(), "schedule spec: quincunx takes no parameters");
    return p;
  }
  if (name == "qlds") {
    p.kind = ScheduleKind::kQlds;
    bool have_alpha = false, have_s = false;
    for (const auto& kv : split(args, ',')) {
      auto eq = kv.find('=');
      require(eq != std::string::npos, "schedule spec: expected key=value, got '", kv, "'");
      std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "alpha") {
        p.alpha = std::stof(val);
        have_alpha = true;
      } else if (key == "S") {
        p.steps = static_cast<u16>(std::stoi(val));
        have_s = true;
      } else {
        fail("schedule spec: unknown qlds key '", key, "'");
      }
    }
    require(have_alpha && have_s, "schedule spec: qlds needs alpha= and S=");
    return p;
  }
  if (name == "implicit-var" || name == "implicit_var") {
    p.kind = ScheduleKind::kImplicitVar;
    std::string list = args;
    const std::string prefix = "scales=";
    if (list.rfind(prefix, 0) == 0) list = list.substr(prefix.size());
    require(!list.empty(), "schedule spec: implicit-var needs scales=");
    for (const auto& item : split(list, ',')) {
      auto x = item.find('x');
      ScalePair sc;
      if (x == std::string::npos) {
        int v = std::stoi(item);
        require(v >= 1 && v <= 0xFFFF, "schedule spec: scale out of range: ", item);
        sc.rows = sc.cols = static_cast<u16>(v);
      } else {
        sc.rows = static_cast<u16>(std::stoi(item.substr(0, x)));
        sc.cols = static_cast<u16>(std::stoi(item.substr(x + 1)));
      }
      p.scales.push_back(sc);
    }
    return p;
  }
  fail("schedule spec: unknown kind '", name, "' (expected checkerboard|quincunx|qlds|implicit-var)");
}

std::string schedule_spec_string(const ScheduleParams& p) {
  switch (p.kind) {
    case ScheduleKind::kCheckerboard:
      return "checkerboard";
    case ScheduleKind::kQuincunx:
      return "quincunx";
    case ScheduleKind::kQlds:
      return cat("qlds:alpha=", p.alpha, ",S=", p.steps);
    case ScheduleKind::kImplicitVar: {
      std::string s = "implicit-var:scales=";
      for (std::size_t i = 0; i < p.scales.size(); ++i) {
        if (i) s += ',';
        if (p.scales[i].rows == p.scales[i].cols) {
          s += cat(p.scales[i].rows);
        } else {
          s += cat(p.scales[i].rows, "x", p.scales[i].cols);
        }
      }
      return s;
    }
  }
  fail("schedule_spec_string: unreachable kind");
}

}  // namespace pcv2
