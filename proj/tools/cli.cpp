#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "pcv2/coder.hpp"
#include "pcv2/flowlab.hpp"
#include "pcv2/gridio.hpp"
#include "pcv2/harness.hpp"
#include "pcv2/multiscale.hpp"
#include "pcv2/probmodel.hpp"
#include "pcv2/schedules.hpp"

namespace pcv2::cli {

namespace {

bool log_enabled() {
  const char* v = std::getenv("PCV2_LOG");
  return v != nullptr && v[0] != '\0' && std::string(v) != "0";
}

void log(const std::string& msg) {
  if (log_enabled()) std::cerr << "[pcv2] " << msg << '\n';
}

void require_file(const std::string& path, const char* flag) {
  if (!std::filesystem::exists(path)) {
    throw UsageError(cat(flag, ": file not found: ", path));
  }
}

// Flag-derived construction: failures are the user's input, not ours.
template <typename F>
auto usage_scope(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::unique_ptr<EntropyModel> load_model(const std::string& spec, u32 V) {
  if (spec.empty() || spec == "uniform") return std::make_unique<UniformModel>(V);
  if (spec == "counting") return std::make_unique<CountingModel>(V);
  require_file(spec, "--model");
  auto bytes = load_checkpoint_bytes(spec);
  u8 kind = checkpoint_kind(bytes);
  switch (kind) {
    case kModelKindMim:
      return std::make_unique<MimCodingModel>(parse_mim(bytes));
    case kModelKindVar:
      return std::make_unique<VarCodingModel>(parse_var(bytes));
    case kModelKindCounting:
      return std::make_unique<CountingModel>(CountingModel::parse(bytes));
    default:
      throw UsageError(cat("--model: checkpoint kind ", static_cast<int>(kind),
                           " cannot drive the entropy coder"));
  }
}

struct CanvasOpt {
  int h = 512;
  int w = 512;
};

void add_canvas_flag(CLI::App* cmd, CanvasOpt& canvas) {
  cmd->add_option_function<std::string>(
      "--canvas",
      [&canvas](const std::string& s) {
        auto x = s.find('x');
        if (x == std::string::npos) throw CLI::ValidationError("--canvas expects HxW");
        canvas.h = std::stoi(s.substr(0, x));
        canvas.w = std::stoi(s.substr(x + 1));
      },
      "Reference canvas for bpp (default 512x512)");
}

void write_text_file(const std::string& path, const std::string& content, const char* what) {
  std::ofstream f(path);
  require(f.good(), what, ": cannot open ", path);
  f << content;
  require(f.good(), what, ": write failed for ", path);
}

// ---------------------------------------------------------------------------

int cmd_encode(const std::string& input, const std::string& schedule_spec,
               const std::string& model_spec, const std::string& out, int groups, u64 seed,
               const CanvasOpt& canvas) {
  require_file(input, "--input");
  TokenGrid grid = load_token_grid(input);
  MaskSchedule sched = usage_scope(
      [&] { return build_schedule(grid.h, grid.w, parse_schedule_spec(schedule_spec)); });
  auto model = load_model(model_spec, grid.V);

  EncodeOptions opts;
  opts.groups_transmitted = usage_scope([&] {
    require(groups <= sched.group_count(), "--groups: must be in [0,", sched.group_count(),
            "], got ", groups);
    return groups;
  });
  opts.sample_seed = seed;
  double rate = transmitted_rate(*model, grid, sched, groups);
  Bitstream bs = encode_grid(grid, sched, *model, opts);
  save_bitstream(bs, out);

  double canvas_px = static_cast<double>(canvas.h) * canvas.w;
  double bpp = rate / canvas_px;
  double uniform_bpp = rate_uniform(grid.h, grid.w, grid.V, canvas.h, canvas.w);
  std::cout << "encode ok=1 tokens=" << grid.positions()
            << " groups_transmitted=" << static_cast<int>(bs.header.groups_transmitted)
            << " payload_bits=" << bs.payload.size() * 8 << " rate_bits=" << rate
            << " bpp=" << bpp << " uniform_bpp=" << uniform_bpp
            << " savings_vs_uniform_pct=" << savings_percent(bpp, uniform_bpp)
            << " header_bits=" << bs.header_bytes() * 8 << " out=" << out << '\n';
  return 0;
}

int cmd_decode(const std::string& input, const std::string& model_spec, const std::string& out) {
  require_file(input, "--input");
  Bitstream bs = load_bitstream(input);
  auto model = load_model(model_spec, bs.header.V);
  TokenGrid grid = decode_grid(bs, *model);
  save_token_grid(grid, out);
  std::cout << "decode ok=1 tokens=" << grid.positions() << " out=" << out << '\n';
  return 0;
}

int cmd_hybrid(const std::string& input, const std::string& schedule_spec,
               const std::string& model_spec, const std::string& out, int groups, u64 seed,
               const std::string& emit_stream, const CanvasOpt& canvas) {
  require_file(input, "--input");
  TokenGrid grid = load_token_grid(input);
  MaskSchedule sched = usage_scope(
      [&] { return build_schedule(grid.h, grid.w, parse_schedule_spec(schedule_spec)); });
  if (groups < 0 || groups > sched.group_count()) {
    throw UsageError(cat("--groups: must be in [0,", sched.group_count(), "], got ", groups));
  }
  auto model = load_model(model_spec, grid.V);

  EncodeOptions opts;
  opts.groups_transmitted = groups;
  opts.sample_seed = seed;
  double rate = transmitted_rate(*model, grid, sched, groups);
  Bitstream bs = encode_grid(grid, sched, *model, opts);
  if (!emit_stream.empty()) save_bitstream(bs, emit_stream);
  TokenGrid full = hybrid_decode(bs, *model);
  save_token_grid(full, out);

  double canvas_px = static_cast<double>(canvas.h) * canvas.w;
  std::cout << "hybrid ok=1 tokens=" << full.positions() << " groups_transmitted=" << groups
            << " of=" << sched.group_count() << " payload_bits=" << bs.payload.size() * 8
            << " transmitted_rate_bits=" << rate << " transmitted_bpp=" << rate / canvas_px
            << " seed=" << seed << " out=" << out << '\n';
  return 0;
}

int cmd_schedule(const std::string& spec, const std::string& dims, bool show_map) {
  auto x = dims.find('x');
  if (x == std::string::npos) throw UsageError("--dims expects HxW");
  int h = std::stoi(dims.substr(0, x));
  int w = std::stoi(dims.substr(x + 1));
  MaskSchedule sched =
      usage_scope([&] { return build_schedule(h, w, parse_schedule_spec(spec)); });
  auto violations = validate_schedule(sched);

  std::cout << "schedule kind=" << schedule_spec_string(sched.params) << " dims=" << h << "x" << w
            << " groups=" << sched.group_count() << " cumulative=";
  auto cum = sched.cumulative_counts();
  for (std::size_t i = 0; i < cum.size(); ++i) {
    if (i) std::cout << ',';
    std::cout << cum[i];
  }
  std::cout << " valid=" << (violations.empty() ? 1 : 0) << '\n';
  for (const auto& v : violations) std::cout << "violation: " << v << '\n';

  if (show_map) {
    std::vector<int> group_of(sched.positions(), -1);
    for (int k = 0; k < sched.group_count(); ++k) {
      for (u32 flat : sched.groups[static_cast<std::size_t>(k)]) group_of[flat] = k;
    }
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        int g = group_of[static_cast<std::size_t>(i) * w + j];
        std::cout << (g < 10 ? static_cast<char>('0' + g) : static_cast<char>('a' + g - 10));
        if (j + 1 < w) std::cout << ' ';
      }
      std::cout << '\n';
    }
  }
  return violations.empty() ? 0 : 1;
}

int cmd_train_mim(const std::string& corpus_spec, int steps, int batch, double lr, u64 seed,
                  int d_model, int n_layers, int n_heads, const std::string& out,
                  const std::string& curve_path) {
  CorpusSpec spec = usage_scope([&] { return parse_corpus_spec(corpus_spec); });
  auto corpus = spec.train();
  log(cat("training masked-token model on ", corpus.size(), " grids"));

  MimModel model = MimModel::create(spec.h, spec.w, spec.source.V, splitmix64(seed), d_model,
                                    n_layers, n_heads);
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = lr;
  cfg.steps = steps;
  cfg.batch = batch;
  MimTrainer trainer(model, cfg);
  std::vector<double> curve;
  double final_loss = trainer.train(corpus, &curve);

  save_checkpoint(serialize_mim(model), out);
  if (!curve_path.empty()) {
    std::ostringstream os;
    os << "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i] << '\n';
    write_text_file(curve_path, os.str(), "--curve");
  }
  std::cout << "train-mim ok=1 steps=" << steps << " final_loss_nats=" << final_loss
            << " out=" << out << '\n';
  return 0;
}

int cmd_train_var(const std::string& corpus_spec, const std::string& schedule_spec, int steps,
                  int batch, double lr, u64 seed, int d_model, int n_layers, int n_heads,
                  const std::string& out, const std::string& curve_path) {
  CorpusSpec spec = usage_scope([&] { return parse_corpus_spec(corpus_spec); });
  auto corpus = spec.train();
  MaskSchedule sched = usage_scope(
      [&] { return build_schedule(spec.h, spec.w, parse_schedule_spec(schedule_spec)); });
  log(cat("training group-causal model on ", corpus.size(), " grids, ", sched.group_count(),
          " groups"));

  VarModel model = VarModel::create(spec.h, spec.w, spec.source.V, sched.group_count(),
                                    splitmix64(seed), d_model, n_layers, n_heads);
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.lr = lr;
  cfg.steps = steps;
  cfg.batch = batch;
  VarTrainer trainer(model, sched, cfg);
  std::vector<double> curve;
  double final_loss = trainer.train(corpus, &curve);

  save_checkpoint(serialize_var(model), out);
  if (!curve_path.empty()) {
    std::ostringstream os;
    os << "step,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i] << '\n';
    write_text_file(curve_path, os.str(), "--curve");
  }
  std::cout << "train-var ok=1 steps=" << steps << " final_loss_nats=" << final_loss
            << " out=" << out << '\n';
  return 0;
}

int cmd_prime_counting(const std::string& corpus_spec, const std::string& schedule_spec,
                       const std::string& out) {
  CorpusSpec spec = usage_scope([&] { return parse_corpus_spec(corpus_spec); });
  auto corpus = spec.train();
  MaskSchedule sched = usage_scope(
      [&] { return build_schedule(spec.h, spec.w, parse_schedule_spec(schedule_spec)); });
  CountingModel model(spec.source.V);
  model.prime(corpus, sched);
  save_checkpoint(model.serialize(), out);
  std::cout << "prime-counting ok=1 grids=" << corpus.size() << " out=" << out << '\n';
  return 0;
}

// Builds the labeled two-mode mixture the toy decoder trains on.
std::vector<FlowSample> toy_mixture_dataset(const FlowConfig& cfg, int count, u64 seed) {
  std::vector<FlowSample> data;
  CounterRng rng(seed);
  MarkovSource src;
  src.V = 16;
  src.seed = splitmix64(seed);
  for (int i = 0; i < count; ++i) {
    int mode = static_cast<int>(rng.next_below(2));
    Vec x1(cfg.dim);
    for (int dd = 0; dd < cfg.dim; ++dd) {
      double center = (dd == 0) ? (mode == 0 ? -2.0 : 2.0) : 0.0;
      x1(dd) = center + 0.05 * rng.next_gaussian();
    }
    // Local conditioning derived from a token grid, as the decoder would see.
    TokenGrid grid = gen_markov_grid(src, 4, 4, static_cast<u64>(i));
    Vec zl(cfg.zl_dim);
    double mean = 0.0, var = 0.0;
    for (u32 sym : grid.indices) mean += sym;
    mean /= static_cast<double>(grid.positions());
    for (u32 sym : grid.indices) var += (sym - mean) * (sym - mean);
    var /= static_cast<double>(grid.positions());
    zl(0) = mean / src.V;
    zl(1) = std::sqrt(var) / src.V;
    zl(2) = static_cast<double>(grid.at(0, 0)) / src.V;
    zl(3) = static_cast<double>(grid.at(grid.h - 1, grid.w - 1)) / src.V;
    Vec zg = Vec::Zero(cfg.zg_dim);
    zg(mode) = 1.0;
    data.push_back({x1, zl, zg});
  }
  return data;
}

int cmd_train_flow(int steps, int batch, double lr, u64 seed, double sigma_min, double lambda,
                   const std::string& out, const std::string& curve_path) {
  FlowConfig cfg;
  cfg.sigma_min = sigma_min;
  cfg.lambda = lambda;
  auto dataset = toy_mixture_dataset(cfg, 2048, splitmix64(seed) ^ 0x5bf0u);
  VectorFieldModel model(cfg, splitmix64(seed));
  auto result = train_toy_decoder(model, dataset, cfg, seed, steps, batch, lr);
  save_flow_model(model, out);
  if (!curve_path.empty()) {
    std::ostringstream os;
    os << "step,loss\n";
    for (std::size_t i = 0; i < result.curve.size(); ++i) os << i << ',' << result.curve[i] << '\n';
    write_text_file(curve_path, os.str(), "--curve");
  }

  // Quick conditional-mode accuracy probe.
  int correct = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    int mode = i % 2;
    Vec zg = Vec::Zero(cfg.zg_dim);
    zg(mode) = 1.0;
    Vec x = ode_sample(model, dataset[static_cast<std::size_t>(i) % dataset.size()].z_local, zg,
                       cfg.steps, cfg.lambda, 1000 + static_cast<u64>(i));
    double target = mode == 0 ? -2.0 : 2.0;
    if (std::abs(x(0) - target) < 2.0) ++correct;
  }
  std::cout << "train-flow ok=1 steps=" << steps << " final_loss=" << result.final_loss
            << " mode_accuracy=" << static_cast<double>(correct) / trials << " out=" << out
            << '\n';
  return 0;
}

struct OrderingAssertion {
  std::vector<std::string> names;
  std::vector<bool> strict;  // strict[i]: names[i] > names[i+1], else >=
};

OrderingAssertion parse_ordering(const std::string& expr) {
  OrderingAssertion out;
  std::size_t pos = 0;
  while (pos < expr.size()) {
    std::size_t ge = expr.find(">=", pos);
    std::size_t gt = expr.find('>', pos);
    if (ge != std::string::npos && ge == gt) {  // ">=" first
      out.names.push_back(expr.substr(pos, ge - pos));
      out.strict.push_back(false);
      pos = ge + 2;
    } else if (gt != std::string::npos) {
      out.names.push_back(expr.substr(pos, gt - pos));
      out.strict.push_back(true);
      pos = gt + 1;
    } else {
      out.names.push_back(expr.substr(pos));
      break;
    }
  }
  require(out.names.size() >= 2, "--assert-ordering: need at least two names");
  return out;
}

int cmd_bench(const std::string& corpus_spec, const std::string& schedules_arg,
              const std::string& mim_path, const std::string& var_path,
              const std::string& var_schedule_name, const std::string& counting_path,
              bool prime_counting, const std::string& out_csv, const std::string& ordering_expr,
              const std::string& ordering_model, double ordering_tol, const CanvasOpt& canvas) {
  CorpusSpec spec = usage_scope([&] { return parse_corpus_spec(corpus_spec); });
  auto test = spec.test();
  require(!test.empty(), "bench: empty test corpus");

  // Named schedule list: "name=spec;name=spec;...".
  std::vector<std::pair<std::string, MaskSchedule>> schedules;
  {
    std::istringstream ss(schedules_arg);
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      require(eq != std::string::npos, "--schedules: expected name=spec, got '", item, "'");
      std::string name = item.substr(0, eq);
      schedules.emplace_back(name,
                             build_schedule(spec.h, spec.w, parse_schedule_spec(item.substr(eq + 1))));
    }
  }
  require(!schedules.empty(), "--schedules: none given");

  std::vector<std::unique_ptr<EntropyModel>> owned;
  std::vector<BenchEntry> entries;

  if (!counting_path.empty() || prime_counting) {
    std::unique_ptr<CountingModel> counting;
    if (!counting_path.empty()) {
      require_file(counting_path, "--counting");
      counting = std::make_unique<CountingModel>(
          CountingModel::parse(load_checkpoint_bytes(counting_path)));
    } else {
      counting = std::make_unique<CountingModel>(spec.source.V);
      auto train = spec.train();
      log("priming counting model on the train split");
      counting->prime(train, schedules.back().second);
    }
    for (auto& [name, sched] : schedules) {
      entries.push_back({"counting", counting.get(), name, &sched});
    }
    owned.push_back(std::move(counting));
  }

  if (!mim_path.empty()) {
    require_file(mim_path, "--mim");
    auto mim = std::make_unique<MimCodingModel>(parse_mim(load_checkpoint_bytes(mim_path)));
    for (auto& [name, sched] : schedules) {
      entries.push_back({"mim", mim.get(), name, &sched});
    }
    owned.push_back(std::move(mim));
  }

  if (!var_path.empty()) {
    require_file(var_path, "--var");
    auto var = std::make_unique<VarCodingModel>(parse_var(load_checkpoint_bytes(var_path)));
    bool found = false;
    for (auto& [name, sched] : schedules) {
      if (name == var_schedule_name) {
        entries.push_back({"var", var.get(), name, &sched});
        found = true;
      }
    }
    require(found, "--var-schedule: name '", var_schedule_name, "' not in --schedules");
    owned.push_back(std::move(var));
  }

  log(cat("benchmarking ", entries.size(), " rows over ", test.size(), " grids"));
  Report report = run_table3(entries, test, canvas.h, canvas.w);
  std::cout << report.to_text();
  if (!out_csv.empty()) write_text_file(out_csv, report.to_csv(), "--out");

  if (!ordering_expr.empty()) {
    OrderingAssertion ord = parse_ordering(ordering_expr);
    auto savings_of = [&](const std::string& name) {
      if (name == "uniform") return 0.0;
      const ReportRow* row = report.find(ordering_model, name);
      require(row != nullptr, "--assert-ordering: no ", ordering_model, " row for schedule '",
              name, "'");
      return row->savings_pct;
    };
    for (std::size_t i = 0; i + 1 < ord.names.size(); ++i) {
      double a = savings_of(ord.names[i]);
      double b = savings_of(ord.names[i + 1]);
      bool ok = ord.strict[i] ? (a > b) : (a >= b - ordering_tol);
      if (!ok) {
        std::cout << "ordering violated: " << ord.names[i] << "=" << a << " vs "
                  << ord.names[i + 1] << "=" << b << '\n';
        return 1;
      }
    }
    std::cout << "ordering ok=1 expr=" << ordering_expr << '\n';
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Hierarchical masked entropy-coding laboratory for token grids"};
  app.require_subcommand(1);

  // encode
  std::string in_path, out_path, schedule_spec = "checkerboard", model_spec, emit_stream;
  std::string corpus_spec = "markov:v=64,p=0.9,h=16,w=16,train=512,test=128,seed=9";
  int groups = -1;
  u64 seed = 1;
  CanvasOpt canvas;

  auto* enc = app.add_subcommand("encode", "Compress a token grid into a .pcv2 stream");
  enc->add_option("--input,-i", in_path, "Token grid text file")->required();
  enc->add_option("--schedule,-s", schedule_spec, "Masking schedule spec");
  enc->add_option("--model,-m", model_spec, "Model checkpoint (or 'uniform'/'counting')");
  enc->add_option("--output,-o", out_path, "Output .pcv2 path")->required();
  enc->add_option("--groups,-k", groups, "Transmit only the first k groups (-1: all)");
  enc->add_option("--seed", seed, "Sampling seed recorded in the header");
  add_canvas_flag(enc, canvas);

  auto* dec = app.add_subcommand("decode", "Decode a fully transmitted .pcv2 stream");
  dec->add_option("--input,-i", in_path, "Input .pcv2 path")->required();
  dec->add_option("--model,-m", model_spec, "Model checkpoint (or 'uniform'/'counting')");
  dec->add_option("--output,-o", out_path, "Output token grid text file")->required();

  auto* hyb = app.add_subcommand("hybrid",
                                 "Transmit a schedule prefix losslessly and sample the rest");
  hyb->add_option("--input,-i", in_path, "Token grid text file")->required();
  hyb->add_option("--schedule,-s", schedule_spec, "Masking schedule spec");
  hyb->add_option("--model,-m", model_spec, "Model checkpoint (or 'uniform'/'counting')");
  hyb->add_option("--output,-o", out_path, "Output token grid text file")->required();
  hyb->add_option("--groups,-k", groups, "Groups transmitted losslessly")->required();
  hyb->add_option("--seed", seed, "Sampling seed");
  hyb->add_option("--emit-stream", emit_stream, "Also write the prefix .pcv2");
  add_canvas_flag(hyb, canvas);

  int steps = 500, batch = 8, d_model = 64, n_layers = 2, n_heads = 4;
  double lr = 3e-4, sigma_min = 1e-5;
  std::string curve_path;

  auto* tmim = app.add_subcommand("train-mim", "Train the masked-token entropy model");
  tmim->add_option("--corpus", corpus_spec, "Corpus spec");
  tmim->add_option("--steps", steps, "Optimizer steps");
  tmim->add_option("--batch", batch, "Batch size");
  tmim->add_option("--lr", lr, "Learning rate");
  tmim->add_option("--seed", seed, "Training seed");
  tmim->add_option("--d-model", d_model, "Model width");
  tmim->add_option("--layers", n_layers, "Transformer blocks");
  tmim->add_option("--heads", n_heads, "Attention heads");
  tmim->add_option("--output,-o", out_path, "Checkpoint path")->required();
  tmim->add_option("--curve", curve_path, "Write loss curve CSV");

  auto* tvar = app.add_subcommand("train-var", "Train the group-causal entropy model");
  tvar->add_option("--corpus", corpus_spec, "Corpus spec");
  tvar->add_option("--schedule,-s", schedule_spec, "Schedule the model is causal over");
  tvar->add_option("--steps", steps, "Optimizer steps");
  tvar->add_option("--batch", batch, "Batch size");
  tvar->add_option("--lr", lr, "Learning rate");
  tvar->add_option("--seed", seed, "Training seed");
  tvar->add_option("--d-model", d_model, "Model width");
  tvar->add_option("--layers", n_layers, "Transformer blocks");
  tvar->add_option("--heads", n_heads, "Attention heads");
  tvar->add_option("--output,-o", out_path, "Checkpoint path")->required();
  tvar->add_option("--curve", curve_path, "Write loss curve CSV");

  double lambda = 1.0;
  auto* tflow = app.add_subcommand("train-flow", "Train the toy conditional flow decoder");
  tflow->add_option("--steps", steps, "Optimizer steps");
  tflow->add_option("--batch", batch, "Batch size");
  tflow->add_option("--lr", lr, "Learning rate");
  tflow->add_option("--seed", seed, "Training seed");
  tflow->add_option("--sigma-min", sigma_min, "Path width floor");
  tflow->add_option("--lambda", lambda, "Guidance scale for the post-training probe");
  tflow->add_option("--output,-o", out_path, "Checkpoint path")->required();
  tflow->add_option("--curve", curve_path, "Write loss curve CSV");

  auto* prime = app.add_subcommand("prime-counting", "Prime the adaptive counting model");
  prime->add_option("--corpus", corpus_spec, "Corpus spec");
  prime->add_option("--schedule,-s", schedule_spec, "Schedule used for priming order");
  prime->add_option("--output,-o", out_path, "Checkpoint path")->required();

  std::string schedules_arg =
      "checkerboard=checkerboard;quincunx=quincunx;qlds5=qlds:alpha=2.2,S=5;"
      "qlds12=qlds:alpha=2.2,S=12";
  std::string mim_path, var_path, counting_path, ordering_expr, out_csv;
  std::string ordering_model = "mim";
  std::string var_schedule_name = "implicitvar";
  bool prime_counting = false, show_map = false;
  double ordering_tol = 0.5;

  auto* bench = app.add_subcommand("bench", "Schedule/model comparison report");
  bench->add_option("--corpus", corpus_spec, "Corpus spec");
  bench->add_option("--schedules", schedules_arg, "Semicolon list of name=spec");
  bench->add_option("--mim", mim_path, "Masked-token model checkpoint");
  bench->add_option("--var", var_path, "Group-causal model checkpoint");
  bench->add_option("--var-schedule", var_schedule_name, "Schedule name the var model pairs with");
  bench->add_option("--counting", counting_path, "Primed counting checkpoint");
  bench->add_flag("--prime-counting", prime_counting, "Prime a counting model on the train split");
  bench->add_option("--out", out_csv, "Report CSV path");
  bench->add_option("--assert-ordering", ordering_expr,
                    "e.g. qlds12>=qlds5>=quincunx>=checkerboard>uniform");
  bench->add_option("--assert-ordering-model", ordering_model,
                    "Model row the ordering applies to (default mim)");
  bench->add_option("--ordering-tolerance", ordering_tol, "Savings-point tolerance for >=");
  add_canvas_flag(bench, canvas);

  auto* sch = app.add_subcommand("schedule", "Inspect a masking schedule");
  std::string dims = "8x8";
  sch->add_option("--spec,-s", schedule_spec, "Schedule spec")->required();
  sch->add_option("--dims", dims, "Grid dims HxW");
  sch->add_flag("--map", show_map, "Print the group map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (enc->parsed()) {
      return cmd_encode(in_path, schedule_spec, model_spec, out_path, groups, seed, canvas);
    }
    if (dec->parsed()) return cmd_decode(in_path, model_spec, out_path);
    if (hyb->parsed()) {
      return cmd_hybrid(in_path, schedule_spec, model_spec, out_path, groups, seed, emit_stream,
                        canvas);
    }
    if (tmim->parsed()) {
      return cmd_train_mim(corpus_spec, steps, batch, lr, seed, d_model, n_layers, n_heads,
                           out_path, curve_path);
    }
    if (tvar->parsed()) {
      return cmd_train_var(corpus_spec, schedule_spec, steps, batch, lr, seed, d_model, n_layers,
                           n_heads, out_path, curve_path);
    }
    if (tflow->parsed()) {
      return cmd_train_flow(steps, batch, lr, seed, sigma_min, lambda, out_path, curve_path);
    }
    if (prime->parsed()) return cmd_prime_counting(corpus_spec, schedule_spec, out_path);
    if (bench->parsed()) {
      return cmd_bench(corpus_spec, schedules_arg, mim_path, var_path, var_schedule_name,
                       counting_path, prime_counting, out_csv, ordering_expr, ordering_model,
                       ordering_tol, canvas);
    }
    if (sch->parsed()) return cmd_schedule(schedule_spec, dims, show_map);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace pcv2::cli
