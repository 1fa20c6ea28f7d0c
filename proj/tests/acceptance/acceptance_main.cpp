// Acceptance suite: every criterion prints one [PASS]/[FAIL] line with the
// tolerance it ran at. The process exits with the number of failures.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gen.hpp"
#include "graph_gen.hpp"
#include "oracles.hpp"
#include "subprocess.hpp"
#include "widthfold/blockdiag.hpp"
#include "widthfold/gemm.hpp"
#include "widthfold/interpreter.hpp"
#include "widthfold/pass.hpp"

using namespace widthfold;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Criterion {
  std::string name;
  std::function<std::string()> body;  // returns detail text; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string g_cli;   // path to the widthfold binary
fs::path g_workdir;  // scratch space

DenseTensor pipeline_original(const DenseTensor& x, const DenseTensor& w,
                              const DenseTensor& b) {
  return bias_add(conv2d(x, w, ConvSpec{x.shape(), w.shape()}), b);
}

DenseTensor pipeline_folded(const FoldResult& r) {
  const ConvSpec spec{r.input.shape(), r.filter.shape()};
  return reconstruct_output(bias_add(conv2d(r.input, r.filter, spec), r.bias),
                            r.plan.factor);
}

// ---------------------------------------------------------------------------

std::string golden_single_conv() {
  const auto t0 = std::chrono::steady_clock::now();

  testgen::Rng rng(1001);
  const DenseTensor xf = rng.float_tensor({1, 32, 64, 1});
  const DenseTensor wf = rng.float_tensor({5, 1, 1, 1});
  const DenseTensor bf = rng.float_tensor({1});
  const FoldResult rf = apply_width_fold(xf, wf, bf, 8);
  require(rf.plan.ok(), "golden fold must apply");
  const float float_diff = max_abs_diff(pipeline_folded(rf),
                                        pipeline_original(xf, wf, bf));
  require(float_diff <= 1e-5f, "float diff above 1e-5");

  const DenseTensor xi = rng.int_tensor({1, 32, 64, 1});
  const DenseTensor wi = rng.int_tensor({5, 1, 1, 1});
  const DenseTensor bi = rng.int_tensor({1});
  const FoldResult ri = apply_width_fold(xi, wi, bi, 8);
  const float int_diff = max_abs_diff(pipeline_folded(ri),
                                      pipeline_original(xi, wi, bi));
  require(int_diff == 0.0f, "integer data must match exactly");

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 1.0, "golden test exceeded 1 s");

  std::ostringstream os;
  os << "float diff " << float_diff << " (tol 1e-5), integer diff " << int_diff
     << ", " << secs << " s";
  return os.str();
}

std::string oracle_equivalence_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  testgen::Rng rng(1002);
  int cases = 0;
  for (const std::int64_t F : {1, 2, 4, 8}) {
    for (const std::int64_t K : {1, 2, 3}) {
      for (std::int64_t H = K; H <= 8; ++H) {
        for (const std::int64_t W : {F, 2 * F}) {
          for (const std::int64_t Cout : {1, 2}) {
            const DenseTensor x = rng.int_tensor({1, H, W, 1});
            const DenseTensor w = rng.int_tensor({K, 1, 1, Cout});
            const DenseTensor b = rng.int_tensor({Cout});
            const FoldResult r = apply_width_fold(x, w, b, F);
            require(r.plan.ok(), "sweep case must be legal");
            const DenseTensor expect =
                oracles::bias_add(oracles::conv2d(x, w, 1, 1), b);
            require(max_abs_diff(pipeline_folded(r), expect) == 0.0f,
                    "folded result differs from the oracle");
            ++cases;
          }
        }
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(cases >= 200, "sweep must cover at least 200 cases");
  require(secs < 10.0, "sweep exceeded 10 s");
  std::ostringstream os;
  os << cases << " cases exact on integer data, " << secs << " s";
  return os.str();
}

std::string bijectivity_suite() {
  testgen::Rng rng(1003);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t F = rng.range(1, 8);
    const std::int64_t B = rng.range(1, 2);
    const std::int64_t H = rng.range(1, 8);
    const std::int64_t C = rng.range(1, 4);
    const std::int64_t max_w = std::max<std::int64_t>(1, 10000 / (B * H * C * F));
    const std::int64_t W = F * rng.range(1, std::min<std::int64_t>(6, max_w));
    const DenseTensor x = rng.float_tensor({B, H, W, C});
    const DenseTensor folded = fold_input_general(x, F);
    require(unfold_input_general(folded, F).bitwise_equal(x),
            "unfold(fold(x)) != x");
    require(folded.bitwise_equal(oracles::fold_input_general(x, F)),
            "fold map differs from the oracle");
  }
  return "1000 random tensors, fold/unfold bitwise identity";
}

std::string structure_suite() {
  testgen::Rng rng(1004);
  for (int i = 0; i < 200; ++i) {
    const std::int64_t F = rng.range(1, 8);
    const std::int64_t K = rng.range(1, 5);
    const std::int64_t Cout = rng.range(1, 3);
    DenseTensor w = rng.float_tensor({K, 1, 1, Cout});
    // keep the block itself free of zeros so nnz counting is exact
    {
      std::vector<float> d(w.data().begin(), w.data().end());
      for (auto& v : d) {
        if (v == 0.0f) v = 0.5f;
      }
      w = DenseTensor(w.shape(), std::move(d));
    }
    const DenseTensor e = expand_filter(w, F);
    require(e.shape() == Shape{K, 1, F, F * Cout}, "expanded shape wrong");

    std::int64_t nnz = 0;
    for (std::int64_t k = 0; k < K; ++k)
      for (std::int64_t f = 0; f < F; ++f)
        for (std::int64_t fp = 0; fp < F; ++fp)
          for (std::int64_t c = 0; c < Cout; ++c) {
            const float v = e.at({k, 0, f, fp * Cout + c});
            if (fp == f) {
              require(v == w.at({k, 0, 0, c}), "diagonal block altered");
            } else {
              require(v == 0.0f, "off-diagonal entry must be exactly zero");
            }
            nnz += v != 0.0f ? 1 : 0;
          }
    require(nnz == F * K * Cout, "nnz must be F*K*Cout");

    const BlockDiagFilter bd = BlockDiagFilter::from_expanded(e, F);
    require(bd.densify().bitwise_equal(e), "densify(from_expanded) != id");
    require(bd.stored_floats() * F == e.size(), "stored floats must be 1/F");
  }
  return "200 filters: zero iff off-diagonal, nnz == F*K*Cout, roundtrip bitwise";
}

std::string grouped_equivalence() {
  testgen::Rng rng(1005);
  int cases = 0;
  for (const std::int64_t F : {1, 2, 4, 8}) {
    for (const std::int64_t K : {1, 2, 3}) {
      for (std::int64_t H = K; H <= 8; ++H) {
        for (const std::int64_t W : {F, 2 * F}) {
          for (const std::int64_t Cout : {1, 2}) {
            const ConvSpec original{{1, H, W, 1}, {K, 1, 1, Cout}};
            const DenseTensor x = rng.int_tensor({1, H, W, 1});
            const DenseTensor w = rng.int_tensor({K, 1, 1, Cout});
            const DenseTensor x_f = fold_input(x, F);
            const DenseTensor w_f = expand_filter(w, F);
            const ConvSpec folded{x_f.shape(), w_f.shape()};

            const BlockDiagFilter bd = BlockDiagFilter::from_expanded(w_f, F);
            const DenseTensor dense = conv2d(x_f, w_f, folded);
            require(grouped_conv(x_f, bd, folded).bitwise_equal(dense),
                    "grouped != dense folded conv");

            std::uint64_t macs_original = 0, macs_dense = 0, macs_grouped = 0;
            oracles::conv2d(x, w, 1, 1, &macs_original);
            oracles::conv2d(x_f, w_f, 1, 1, &macs_dense);
            oracles::grouped_conv(x_f, w_f, F, 1, 1, &macs_grouped);
            require(macs_grouped == macs_original,
                    "grouped MACs != original MACs");
            require(macs_dense ==
                        static_cast<std::uint64_t>(F) * macs_original,
                    "dense folded MACs != F * original");

            const MacReport report =
                mac_report(original, check_legality(original, F, 8), 8);
            require(report.original == macs_original &&
                        report.dense_folded == macs_dense &&
                        report.grouped_folded == macs_grouped,
                    "mac_report disagrees with instrumented counters");
            ++cases;
          }
        }
      }
    }
  }
  std::ostringstream os;
  os << cases << " cases bitwise, MAC identities hold";
  return os.str();
}

std::string gemm_suite() {
  testgen::Rng rng(1006);
  for (std::int64_t M = 1; M <= 5; ++M)
    for (std::int64_t K = 1; K <= 5; ++K)
      for (std::int64_t N = 1; N <= 5; ++N) {
        const DenseTensor a = rng.int_tensor({M, K});
        const DenseTensor b = rng.int_tensor({K, N});
        require(max_abs_diff(gemm_as_conv1x1(a, b), gemm_ref(a, b)) == 0.0f,
                "gemm_as_conv1x1 != gemm_ref");
      }

  int aligned_cases = 0;
  for (const std::int64_t F : {2, 4, 8}) {
    for (const std::int64_t mult : {1, 2, 4}) {
      for (const std::int64_t K : {1, 2, 3}) {
        for (const std::int64_t N : {1, 4}) {
          const std::int64_t M = F * mult;
          const DenseTensor a = rng.int_tensor({M, K});
          const DenseTensor b = rng.int_tensor({K, N});
          require(max_abs_diff(fold_tall_skinny(a, b, F), gemm_ref(a, b)) ==
                      0.0f,
                  "fold_tall_skinny != gemm_ref");
          if ((K * F) % 8 == 0) {
            ++aligned_cases;
          }
        }
      }
    }
  }
  require(aligned_cases > 0, "sweep must include aligned folded channels");
  std::ostringstream os;
  os << "125 exhaustive 1x1 cases exact; tall-skinny sweep exact ("
     << aligned_cases << " cases land on 8-channel alignment)";
  return os.str();
}

std::string pass_soundness() {
  const auto t0 = std::chrono::steady_clock::now();
  testgen::Rng rng(1007);
  int applied_total = 0;
  for (int i = 0; i < 100; ++i) {
    const Graph g = testgen::random_model(rng);

    std::size_t rewritable = 0;
    for (const auto& n : g.nodes) {
      rewritable += (n.op == OpKind::Conv2d || n.op == OpKind::Matmul) ? 1 : 0;
    }

    const PassResult first = width_fold_pass(g, FoldFactor::automatic(), 8);
    require(first.report.decisions.size() == rewritable,
            "report must cover every conv/matmul exactly once");
    applied_total += static_cast<int>(first.report.applied_count());

    for (int t = 0; t < 3; ++t) {
      const TensorMap in = testgen::random_bindings(g, rng);
      const TensorMap want = interpret(g, in);
      const TensorMap dense = interpret(first.graph, in, ExecMode::Dense);
      const TensorMap grouped = interpret(first.graph, in, ExecMode::Grouped);
      for (const auto& [name, tensor] : want) {
        require(max_abs_diff(tensor, dense.at(name)) == 0.0f,
                "dense execution differs (integer data must be exact)");
        require(max_abs_diff(tensor, grouped.at(name)) == 0.0f,
                "grouped execution differs (integer data must be exact)");
      }
    }

    const PassResult second =
        width_fold_pass(first.graph, FoldFactor::automatic(), 8);
    require(second.report.applied_count() == 0, "pass must be idempotent");
    require(graphs_equal(first.graph, second.graph),
            "second application changed the graph");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 60.0, "pass soundness exceeded 60 s");
  require(applied_total > 0, "generator never produced a foldable node");
  std::ostringstream os;
  os << "100 graphs, " << applied_total
     << " folds applied, outputs exact, idempotent, " << secs << " s";
  return os.str();
}

std::string cli_contract() {
  const fs::path dir = g_workdir / "cli";
  fs::create_directories(dir);
  testgen::Rng rng(1008);

  const Graph golden = testgen::conv_bias_model(1, 32, 64, 1, 5, 1, rng);
  write_graph(golden, dir / "golden.json");

  // apply: folds the single conv, reports the expanded filter shape
  auto apply = testsupport::run(g_cli + " apply " + (dir / "golden.json").string() +
                                " " + (dir / "folded.json").string() +
                                " --factor 8 --align 8");
  require(apply.exit_code == 0, "apply must exit 0");
  const json apply_report = json::parse(apply.output);
  require(apply_report["applied"] == 1, "apply must rewrite the conv");
  require(apply_report["decisions"][0]["expanded_filter_shape"] ==
              json::array({5, 1, 8, 8}),
          "expanded filter shape must be (5,1,8,8)");
  const Graph folded = read_graph(dir / "folded.json");
  require(folded.weights.contains("w0_folded8") &&
              folded.weights.at("w0_folded8").shape() == Shape{5, 1, 8, 8},
          "output bundle must hold the (5,1,8,8) filter");

  // verify: original vs folded passes at 1e-5 on integer data
  const std::string verify_cmd = g_cli + " verify " +
                                 (dir / "golden.json").string() + " " +
                                 (dir / "folded.json").string() +
                                 " --random 7 --trials 10 --atol 1e-5";
  auto verify = testsupport::run(verify_cmd);
  require(verify.exit_code == 0, "verify must exit 0");
  const json verify_report = json::parse(verify.output);
  require(verify_report["verdict"] == "pass", "verify verdict must be pass");
  require(verify_report["exact_on_integer_data"] == true,
          "integer data must verify exactly");

  // determinism: identical invocations produce byte-identical reports
  require(testsupport::run(verify_cmd).output == verify.output,
          "verify reports must be byte-identical for a fixed seed");

  // float data stays within the documented tolerance
  auto verify_float = testsupport::run(verify_cmd + " --float-data");
  require(verify_float.exit_code == 0, "float-data verify must pass");

  // self comparison is exactly zero
  auto self = testsupport::run(g_cli + " verify " +
                               (dir / "golden.json").string() + " " +
                               (dir / "golden.json").string() + " --trials 3");
  require(self.exit_code == 0, "self verify must exit 0");
  require(json::parse(self.output)["max_abs_diff"] == 0.0,
          "self verify must be exactly zero");

  // fallback model: exit 0, skipped with WidthNotDivisible
  const Graph narrow = testgen::conv_bias_model(1, 8, 7, 1, 3, 1, rng);
  write_graph(narrow, dir / "narrow.json");
  auto fallback = testsupport::run(g_cli + " apply " +
                                   (dir / "narrow.json").string() + " " +
                                   (dir / "narrow_out.json").string() +
                                   " --factor 8");
  require(fallback.exit_code == 0, "all-skipped apply must still exit 0");
  const json fb = json::parse(fallback.output);
  require(fb["applied"] == 0 &&
              fb["decisions"][0]["reason"] == "WidthNotDivisible",
          "fallback must be Skipped(WidthNotDivisible)");

  // a perturbed weight makes verification fail with exit 1
  {
    Graph broken = read_graph(dir / "folded.json");
    const DenseTensor& w = broken.weights.at("w0_folded8");
    std::vector<float> d(w.data().begin(), w.data().end());
    d[0] += 1e-2f;
    const Shape shape = w.shape();
    broken.weights.remove("w0_folded8");
    broken.weights.add("w0_folded8", DenseTensor(shape, std::move(d)));
    write_graph(broken, dir / "broken.json");
  }
  auto bad = testsupport::run(g_cli + " verify " +
                              (dir / "golden.json").string() + " " +
                              (dir / "broken.json").string() +
                              " --random 7 --trials 5 --atol 1e-5");
  require(bad.exit_code == 1, "perturbed model must fail verification (exit 1)");
  require(json::parse(bad.output)["max_abs_diff"].get<double>() > 0.0,
          "perturbation must surface as a nonzero diff");

  // invalid model: exit 2
  std::ofstream(dir / "garbage.json") << "{not a model";
  auto garbage = testsupport::run(g_cli + " apply " +
                                  (dir / "garbage.json").string() + " " +
                                  (dir / "out.json").string());
  require(garbage.exit_code == 2, "parse failure must exit 2");

  // signature mismatch between models: exit 2
  auto mismatch = testsupport::run(g_cli + " verify " +
                                   (dir / "golden.json").string() + " " +
                                   (dir / "narrow.json").string());
  require(mismatch.exit_code == 2, "signature mismatch must exit 2");

  // factor 1 is the identity: nothing applied, weights byte-identical
  auto identity = testsupport::run(g_cli + " apply " +
                                   (dir / "golden.json").string() + " " +
                                   (dir / "ident.json").string() +
                                   " --factor 1");
  require(identity.exit_code == 0, "factor-1 apply must exit 0");
  const json ident_report = json::parse(identity.output);
  require(ident_report["applied"] == 0 &&
              ident_report["decisions"][0]["reason"] == "AlreadyAligned",
          "factor 1 must be skipped as an identity fold");
  {
    std::ifstream a(dir / "golden.weights.bin", std::ios::binary);
    std::ifstream b(dir / "ident.weights.bin", std::ios::binary);
    const std::string wa((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    const std::string wb((std::istreambuf_iterator<char>(b)),
                         std::istreambuf_iterator<char>());
    require(!wa.empty() && wa == wb,
            "factor 1 must leave the weight bytes untouched");
  }

  // inspect: an RGB first layer is flagged with the auto suggestion
  const Graph rgb = testgen::conv_bias_model(1, 16, 16, 3, 3, 4, rng);
  write_graph(rgb, dir / "rgb.json");
  auto inspect = testsupport::run(g_cli + " inspect " +
                                  (dir / "rgb.json").string() + " --align 8");
  require(inspect.exit_code == 0, "inspect must exit 0");
  const json ins = json::parse(inspect.output);
  require(ins["nodes"][0]["aligned"] == false, "Cin=3 must be flagged");
  require(ins["nodes"][0]["suggestion"]["factor"] == 8,
          "auto rule must suggest F=8 for Cin=3");

  // a fully aligned model draws no suggestions
  const Graph aligned = testgen::conv_bias_model(1, 8, 8, 8, 3, 8, rng);
  write_graph(aligned, dir / "aligned.json");
  auto ins_aligned = testsupport::run(g_cli + " inspect " +
                                      (dir / "aligned.json").string());
  const json insa = json::parse(ins_aligned.output);
  require(insa["all_aligned"] == true &&
              insa["nodes"][0]["suggestion"].is_null(),
          "aligned model must have no fold suggestions");

  // apply -> verify pipeline holds on generated models too
  for (int i = 0; i < 8; ++i) {
    const Graph model = testgen::random_model(rng);
    const auto in_path = dir / ("gen" + std::to_string(i) + ".json");
    const auto out_path = dir / ("gen" + std::to_string(i) + "_folded.json");
    write_graph(model, in_path);
    auto a = testsupport::run(g_cli + " apply " + in_path.string() + " " +
                              out_path.string() + " --factor auto --align 8");
    require(a.exit_code == 0, "apply must succeed on generated models");
    auto v = testsupport::run(g_cli + " verify " + in_path.string() + " " +
                              out_path.string() +
                              " --random 3 --trials 4 --atol 1e-5");
    require(v.exit_code == 0 && json::parse(v.output)["verdict"] == "pass",
            "apply->verify must pass on generated models");
  }

  return "apply/verify/inspect honour the exit-code and report contract";
}

std::string bench_informational() {
  const fs::path dir = g_workdir / "bench";
  fs::create_directories(dir);
  testgen::Rng rng(1009);
  const Graph golden = testgen::conv_bias_model(1, 32, 64, 1, 5, 1, rng);
  write_graph(golden, dir / "golden.json");

  auto bench = testsupport::run(g_cli + " bench " +
                                (dir / "golden.json").string() +
                                " --reps 5 --factor 8 --align 8");
  require(bench.exit_code == 0, "bench must exit 0");
  const json report = json::parse(bench.output);

  std::uint64_t macs_original = 0, macs_grouped = 0, macs_dense = 0;
  double ms_dense = 0, ms_grouped = 0;
  for (const auto& path : report["paths"]) {
    if (path["name"] == "original_dense") {
      macs_original = path["macs"].get<std::uint64_t>();
    } else if (path["name"] == "folded_dense") {
      macs_dense = path["macs"].get<std::uint64_t>();
      ms_dense = path["wall_ms"]["median"].get<double>();
    } else if (path["name"] == "folded_grouped") {
      macs_grouped = path["macs"].get<std::uint64_t>();
      ms_grouped = path["wall_ms"]["median"].get<double>();
    }
  }
  require(macs_grouped == macs_original,
          "grouped-path MACs must equal the original count");
  require(macs_dense == 8 * macs_original,
          "dense-folded MACs must be F x original");

  // Timings are informational only, never asserted.
  std::ostringstream os;
  os << "grouped MACs == original (" << macs_original
     << "); timings (median ms, informational): folded_dense=" << ms_dense
     << ", folded_grouped=" << ms_grouped;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i) {
    if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
  }
  if (g_cli.empty()) {
    const char* env = std::getenv("WIDTHFOLD_CLI");
    if (env) g_cli = env;
  }
  if (g_cli.empty()) {
    std::cerr << "usage: acceptance --cli <path-to-widthfold-binary>\n";
    return 64;
  }
  g_workdir = fs::temp_directory_path() / "widthfold_acceptance";
  fs::remove_all(g_workdir);
  fs::create_directories(g_workdir);

  const std::vector<Criterion> criteria = {
      {"golden-single-conv", golden_single_conv},
      {"oracle-equivalence-sweep", oracle_equivalence_sweep},
      {"bijectivity-suite", bijectivity_suite},
      {"structure-suite", structure_suite},
      {"grouped-execution-equivalence", grouped_equivalence},
      {"gemm-suite", gemm_suite},
      {"pass-soundness", pass_soundness},
      {"cli-contract", cli_contract},
      {"bench-informational", bench_informational},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    try {
      const std::string detail = c.body();
      std::cout << "[PASS] " << c.name << ": " << detail << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << c.name << ": " << e.what() << "\n";
    }
  }
  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures;
}
