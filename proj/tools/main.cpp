// widthfold: apply the width-folding pass to a model bundle, verify
// equivalence, inspect alignment, and benchmark execution paths.
// Reports go to stdout as JSON, diagnostics to stderr.
// Exit codes: 0 ok, 1 verification failed, 2 usage or data error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "widthfold/blockdiag.hpp"
#include "widthfold/interpreter.hpp"
#include "widthfold/pass.hpp"

namespace wf = widthfold;
using nlohmann::json;

namespace {

// Deterministic test-data generator. The mapping from raw engine output to
// values is spelled out here so reports are reproducible across standard
// library implementations, not just across runs.
struct DataGen {
  std::mt19937 rng;
  explicit DataGen(std::uint32_t seed) : rng(seed) {}

  // Small integers in [-4, 4]: products and sums stay exact in float32.
  float next_int() { return static_cast<float>(static_cast<int>(rng() % 9) - 4); }
  // Uniform in [-1, 1) with 24 bits of resolution.
  float next_float() {
    return static_cast<float>(rng() >> 8) * (2.0f / 16777216.0f) - 1.0f;
  }

  wf::DenseTensor tensor(const wf::Shape& shape, bool integer) {
    std::vector<float> data(static_cast<std::size_t>(wf::numel(shape)));
    for (auto& v : data) v = integer ? next_int() : next_float();
    return wf::DenseTensor(shape, std::move(data));
  }
};

json cost_json(const wf::CostEstimate& c) {
  return json{{"macs", c.macs},
              {"aligned", c.aligned},
              {"footprint_floats", c.footprint_floats}};
}

json decision_json(const wf::NodeDecision& d) {
  json j{{"id", d.id}, {"kind", wf::to_string(d.kind)}};
  if (d.applied) {
    j["decision"] = "applied";
    j["factor"] = d.plan.factor;
    j["folded_input_shape"] = d.plan.folded_input_shape;
    j["expanded_filter_shape"] = d.plan.expanded_filter_shape;
  } else {
    j["decision"] = "skipped";
    j["reason"] = wf::to_string(d.plan.reason);
    j["factor"] = d.plan.factor;
  }
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

json report_json(const wf::RewriteReport& report, const std::string& factor,
                 std::int64_t align) {
  json decisions = json::array();
  for (const auto& d : report.decisions) decisions.push_back(decision_json(d));
  return json{{"factor", factor},
              {"align", align},
              {"decisions", decisions},
              {"applied", report.applied_count()},
              {"skipped", report.decisions.size() - report.applied_count()},
              {"cost_before", cost_json(report.before)},
              {"cost_after", cost_json(report.after)}};
}

wf::FoldFactor parse_factor(const std::string& text) {
  if (text == "auto") return wf::FoldFactor::automatic();
  std::size_t used = 0;
  const long long v = std::stoll(text, &used);
  if (used != text.size() || v < 1) {
    throw CLI::ValidationError("--factor", "expected 'auto' or a positive integer");
  }
  return wf::FoldFactor::fixed(v);
}

struct ApplyOpts {
  std::string model_in, model_out;
  std::string factor = "auto";
  std::int64_t align = 8;
};

int cmd_apply(const ApplyOpts& opt) {
  wf::Graph g = wf::read_graph(opt.model_in);
  auto result = wf::width_fold_pass(std::move(g), parse_factor(opt.factor),
                                    opt.align);
  wf::write_graph(result.graph, opt.model_out);
  std::cout << report_json(result.report, opt.factor, opt.align).dump(2)
            << std::endl;
  return 0;
}

struct VerifyOpts {
  std::string model_a, model_b;
  std::string inputs_bundle;
  std::uint32_t seed = 0;
  int trials = 10;
  double atol = 1e-5;
  bool float_data = false;
};

int cmd_verify(const VerifyOpts& opt) {
  const wf::Graph a = wf::infer_shapes(wf::read_graph(opt.model_a));
  const wf::Graph b = wf::infer_shapes(wf::read_graph(opt.model_b));

  // Models must agree on the external signature: same inputs with the same
  // shapes, same output names with the same shapes.
  auto signature = [](const wf::Graph& g) {
    std::vector<std::pair<std::string, wf::Shape>> sig;
    for (const auto& n : g.nodes) {
      if (n.op == wf::OpKind::Input || n.op == wf::OpKind::Output) {
        sig.emplace_back(n.id, n.out_shape);
      }
    }
    std::sort(sig.begin(), sig.end());
    return sig;
  };
  if (signature(a) != signature(b)) {
    std::cerr << "error: models do not share input/output signatures\n";
    return 2;
  }

  std::vector<wf::TensorMap> bindings;
  std::string data_kind;
  if (!opt.inputs_bundle.empty()) {
    const wf::TensorBundle bundle = wf::read_bundle(opt.inputs_bundle);
    wf::TensorMap m;
    for (const auto& id : a.input_ids()) {
      if (!bundle.contains(id)) {
        std::cerr << "error: inputs bundle has no tensor '" << id << "'\n";
        return 2;
      }
      m.emplace(id, bundle.at(id));
    }
    bindings.push_back(std::move(m));
    data_kind = "bundle";
  } else {
    DataGen gen(opt.seed);
    for (int t = 0; t < opt.trials; ++t) {
      wf::TensorMap m;
      for (const auto& id : a.input_ids()) {
        m.emplace(id, gen.tensor(a.find(id)->out_shape, !opt.float_data));
      }
      bindings.push_back(std::move(m));
    }
    data_kind = opt.float_data ? "float" : "integer";
  }

  std::map<std::string, double> worst;  // per output, max over trials
  for (const auto& m : bindings) {
    const wf::TensorMap ya = wf::interpret(a, m);
    const wf::TensorMap yb = wf::interpret(b, m);
    for (const auto& [name, ta] : ya) {
      const double d = wf::max_abs_diff(ta, yb.at(name));
      auto [it, inserted] = worst.try_emplace(name, d);
      if (!inserted && !(d <= it->second)) it->second = d;  // keeps NaN
    }
  }

  double overall = 0.0;
  bool pass = true;
  json outputs = json::array();
  for (const auto& [name, d] : worst) {
    outputs.push_back({{"name", name}, {"max_abs_diff", d}});
    if (!(d <= overall)) overall = d;
    pass = pass && d <= opt.atol;
  }
  const bool exact = data_kind == "integer" && overall == 0.0;

  json report{{"tolerance", opt.atol},
              {"trials", static_cast<int>(bindings.size())},
              {"data", data_kind},
              {"outputs", outputs},
              {"max_abs_diff", overall},
              {"exact_on_integer_data", exact},
              {"pass_report", nullptr},
              {"verdict", pass ? "pass" : "fail"}};
  std::cout << report.dump(2) << std::endl;
  return pass ? 0 : 1;
}

struct InspectOpts {
  std::string model;
  std::int64_t align = 8;
};

int cmd_inspect(const InspectOpts& opt) {
  const wf::Graph g = wf::infer_shapes(wf::read_graph(opt.model));
  json nodes = json::array();
  bool all_aligned = true;
  for (const auto& node : g.nodes) {
    if (node.op == wf::OpKind::Conv2d) {
      const wf::ConvSpec spec = wf::conv_spec_of(g, node);
      const bool aligned = spec.in_c() % opt.align == 0;
      all_aligned = all_aligned && aligned;
      json jn{{"id", node.id},
              {"kind", "conv2d"},
              {"reduction_channels", spec.in_c()},
              {"aligned", aligned}};
      if (aligned) {
        jn["suggestion"] = nullptr;
      } else {
        const wf::FoldPlan plan = wf::choose_fold_factor(spec, opt.align);
        json s{{"factor", plan.factor}, {"legal", plan.ok()}};
        if (plan.ok()) {
          s["folded_channels"] = spec.in_c() * plan.factor;
        } else {
          s["reason"] = wf::to_string(plan.reason);
        }
        jn["suggestion"] = s;
      }
      nodes.push_back(jn);
    } else if (node.op == wf::OpKind::Matmul) {
      const std::int64_t K = g.find(node.inputs[0])->out_shape[1];
      const bool aligned = K % opt.align == 0;
      all_aligned = all_aligned && aligned;
      nodes.push_back({{"id", node.id},
                       {"kind", "matmul"},
                       {"reduction_channels", K},
                       {"aligned", aligned}});
    }
  }
  json report{{"align", opt.align}, {"nodes", nodes}, {"all_aligned", all_aligned}};
  std::cout << report.dump(2) << std::endl;
  return 0;
}

struct BenchOpts {
  std::string model;
  int reps = 10;
  std::string path = "all";
  std::string factor = "auto";
  std::int64_t align = 8;
  std::uint32_t seed = 0;
};

// Floats touched by the compute nodes: operand reads plus result writes.
// Grouped accounting charges only the stored diagonal blocks of a filter.
std::uint64_t floats_moved(const wf::Graph& g, wf::MacAccounting acc) {
  std::uint64_t total = 0;
  for (const auto& node : g.nodes) {
    if (node.op != wf::OpKind::Conv2d && node.op != wf::OpKind::Matmul &&
        node.op != wf::OpKind::BiasAdd) {
      continue;
    }
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      std::uint64_t n =
          static_cast<std::uint64_t>(wf::numel(g.find(node.inputs[i])->out_shape));
      if (node.op == wf::OpKind::Conv2d && i == 1 &&
          acc == wf::MacAccounting::Grouped) {
        n /= static_cast<std::uint64_t>(node.groups);
      }
      total += n;
    }
    total += static_cast<std::uint64_t>(wf::numel(node.out_shape));
  }
  return total;
}

int cmd_bench(const BenchOpts& opt) {
  const wf::Graph original = wf::infer_shapes(wf::read_graph(opt.model));
  auto folded = wf::width_fold_pass(original, parse_factor(opt.factor),
                                    opt.align);

  DataGen gen(opt.seed);
  wf::TensorMap inputs;
  for (const auto& id : original.input_ids()) {
    inputs.emplace(id, gen.tensor(original.find(id)->out_shape, true));
  }

  auto measure = [&](const wf::Graph& g, wf::ExecMode mode) {
    std::vector<double> ms;
    ms.reserve(static_cast<std::size_t>(opt.reps));
    for (int r = 0; r < opt.reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      wf::interpret(g, inputs, mode);
      const auto t1 = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    return json{{"min", ms.front()}, {"median", ms[ms.size() / 2]}};
  };

  json paths = json::array();
  paths.push_back(
      {{"name", "original_dense"},
       {"macs", wf::cost(original, opt.align, wf::MacAccounting::Dense).macs},
       {"floats_moved", floats_moved(original, wf::MacAccounting::Dense)},
       {"wall_ms", measure(original, wf::ExecMode::Dense)}});
  if (opt.path == "all" || opt.path == "dense") {
    paths.push_back(
        {{"name", "folded_dense"},
         {"macs",
          wf::cost(folded.graph, opt.align, wf::MacAccounting::Dense).macs},
         {"floats_moved", floats_moved(folded.graph, wf::MacAccounting::Dense)},
         {"wall_ms", measure(folded.graph, wf::ExecMode::Dense)}});
  }
  if (opt.path == "all" || opt.path == "grouped") {
    paths.push_back(
        {{"name", "folded_grouped"},
         {"macs",
          wf::cost(folded.graph, opt.align, wf::MacAccounting::Grouped).macs},
         {"floats_moved",
          floats_moved(folded.graph, wf::MacAccounting::Grouped)},
         {"wall_ms", measure(folded.graph, wf::ExecMode::Grouped)}});
  }

  json report{{"reps", opt.reps},
              {"align", opt.align},
              {"factor", opt.factor},
              {"seed", opt.seed},
              {"fold_applied", folded.report.applied_count() > 0},
              {"paths", paths}};
  std::cout << report.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"width folding for hardware channel alignment"};
  app.require_subcommand(1);

  ApplyOpts apply_opts;
  auto* apply = app.add_subcommand(
      "apply", "rewrite a model, writing the folded graph and weights");
  apply->add_option("model_in", apply_opts.model_in)->required();
  apply->add_option("model_out", apply_opts.model_out)->required();
  apply->add_option("--factor", apply_opts.factor,
                    "fold factor, or 'auto' for the smallest aligning one");
  apply->add_option("--align", apply_opts.align, "channel alignment target")
      ->check(CLI::PositiveNumber);

  VerifyOpts verify_opts;
  auto* verify = app.add_subcommand(
      "verify", "interpret two models on shared inputs and compare outputs");
  verify->add_option("model_a", verify_opts.model_a)->required();
  verify->add_option("model_b", verify_opts.model_b)->required();
  verify->add_option("--inputs", verify_opts.inputs_bundle,
                     "tensor bundle manifest binding the graph inputs");
  verify->add_option("--random", verify_opts.seed,
                     "seed for generated input data");
  verify->add_option("--trials", verify_opts.trials)->check(CLI::PositiveNumber);
  verify->add_option("--atol", verify_opts.atol, "absolute tolerance");
  verify->add_flag("--float-data", verify_opts.float_data,
                   "draw uniform floats instead of small integers");

  InspectOpts inspect_opts;
  auto* inspect = app.add_subcommand(
      "inspect", "report per-node alignment status and fold opportunities");
  inspect->add_option("model", inspect_opts.model)->required();
  inspect->add_option("--align", inspect_opts.align)->check(CLI::PositiveNumber);

  BenchOpts bench_opts;
  auto* bench = app.add_subcommand(
      "bench", "time the original, folded-dense and folded-grouped paths");
  bench->add_option("model", bench_opts.model)->required();
  bench->add_option("--reps", bench_opts.reps)->check(CLI::PositiveNumber);
  bench->add_option("--path", bench_opts.path)
      ->check(CLI::IsMember({"all", "dense", "grouped"}));
  bench->add_option("--factor", bench_opts.factor);
  bench->add_option("--align", bench_opts.align)->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_opts.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (apply->parsed()) return cmd_apply(apply_opts);
    if (verify->parsed()) return cmd_verify(verify_opts);
    if (inspect->parsed()) return cmd_inspect(inspect_opts);
    if (bench->parsed()) return cmd_bench(bench_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
