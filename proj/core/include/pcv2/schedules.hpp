#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcv2/bytes.hpp"
#include "pcv2/common.hpp"

namespace pcv2 {

// Wire values; part of the bitstream contract.
enum class ScheduleKind : u8 {
  kCheckerboard = 0,
  kQuincunx = 1,
  kQlds = 2,
  kImplicitVar = 3,
};

struct ScalePair {
  u16 rows = 0;
  u16 cols = 0;
  bool operator==(const ScalePair&) const = default;
};

// Everything needed to rebuild a schedule bit-identically on the other side.
// `alpha` is stored as f32 on the wire; constructors narrow before use so a
// round trip through the header cannot change the grouping.
struct ScheduleParams {
  ScheduleKind kind = ScheduleKind::kCheckerboard;
  float alpha = 0.0f;             // qlds
  u16 steps = 0;                  // qlds S
  std::vector<ScalePair> scales;  // implicit_var

  bool operator==(const ScheduleParams&) const = default;
};

// Ordered partition of the h*w grid positions into coding groups. Group
// vectors hold flat indices (i*w + j); their order within a group is the
// symbol order the coder uses.
struct MaskSchedule {
  int h = 0;
  int w = 0;
  ScheduleParams params;
  std::vector<std::vector<u32>> groups;

  int group_count() const { return static_cast<int>(groups.size()); }
  std::size_t positions() const { return static_cast<std::size_t>(h) * w; }
  std::vector<std::size_t> cumulative_counts() const;

  bool operator==(const MaskSchedule&) const = default;
};

// G1 = even-parity cells in raster order, G2 = the rest; degenerates to a
// single group on 1x1 grids.
MaskSchedule checkerboard_schedule(int h, int w);

// Five coordinate classes, coarse to fine; requires h and w to be multiples
// of 4.
MaskSchedule quincunx_schedule(int h, int w);

// Positions ordered by the 2-D additive low-discrepancy recurrence (plastic
// constant), split into S groups with cumulative sizes ceil(N*(i/S)^alpha),
// forced strictly increasing and ending at N.
MaskSchedule qlds_schedule(int h, int w, double alpha, int steps);

// Per-axis index lattices idx(s, n) = { floor(t*n/s) : t < s }; group k is
// the kth lattice minus everything already revealed. Scale pairs must be
// strictly increasing with nested index sets and end at (h, w).
MaskSchedule implicit_var_schedule(int h, int w, std::vector<ScalePair> scales);
MaskSchedule implicit_var_schedule(int h, int w, const std::vector<int>& square_scales);

// The exact cumulative group sizes the qlds constructor will produce.
std::vector<std::size_t> qlds_cumulative(std::size_t n, double alpha, int steps);

// Partition / nonemptiness / rebuild-determinism checks. Returns one message
// per violation; empty means the schedule is sound.
std::vector<std::string> validate_schedule(const MaskSchedule& s);

// Header encoding: kind u8, then kind-specific params (qlds: alpha f32 LE +
// S u16 LE; implicit_var: count u8 + (rows u16 LE, cols u16 LE) per scale).
void write_schedule_params(ByteWriter& w, const ScheduleParams& p);
ScheduleParams read_schedule_params(ByteReader& r);

// Rebuilds the schedule a header describes; decoder-side entry point.
MaskSchedule build_schedule(int h, int w, const ScheduleParams& p);

// Spec strings for the CLI: "checkerboard", "quincunx",
// "qlds:alpha=2.2,S=5", "implicit-var:scales=2,4,6,8" (or "2x2,4x4,..." for
// non-square lattices).
ScheduleParams parse_schedule_spec(const std::string& spec);
std::string schedule_spec_string(const ScheduleParams& p);

}  // namespace pcv2
