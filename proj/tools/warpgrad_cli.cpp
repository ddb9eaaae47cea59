#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "warpgrad/commands.hpp"
#include "warpgrad/errors.hpp"

using namespace warpgrad;

int main(int argc, char** argv) {
  CLI::App app{"warpgrad: differentiable continuous-time warping"};
  app.require_subcommand(1);

  AlignRequest align;
  std::string interpolation;
  std::string batch_dir;
  std::string output;
  std::string constraints;
  double band = -1.0;
  auto* a = app.add_subcommand("align", "Align y to the reference x");
  a->add_option("x", align.x_path, "Reference series (CSV or JSON)");
  a->add_option("y", align.y_path, "Series to warp (CSV or JSON)");
  a->add_option("--mode", align.mode, "gdtw or dtw")->check(CLI::IsMember({"gdtw", "dtw"}));
  a->add_option("--lambda", align.lambda, "Warp regularization weight");
  a->add_option("-M,--resolution", align.resolution, "Grid candidates per knot (0: max(50, n))");
  a->add_option("--eta", align.eta, "Refinement shrink factor");
  a->add_option("--iters", align.iterations, "Refinement iterations");
  a->add_flag("!--no-polish", align.polish, "Return the DP warp without continuous refinement");
  a->add_option("--knots", align.knots, "Warp knots (0: one per sample of x)");
  a->add_option("--interpolation", interpolation, "linear or cubic (default: file, else linear)");
  a->add_option("--s-min", align.s_min, "Lower slope bound");
  a->add_option("--s-max", align.s_max, "Upper slope bound");
  a->add_option("--band", band, "Sakoe-Chiba half-width on the unit time axis");
  a->add_option("--constraints", constraints, "JSON with s_min, s_max, b_min, b_max arrays");
  a->add_flag("--subsequence", align.subsequence, "Free endpoints");
  a->add_option("-o,--output", output, "Output file (batch mode: directory)");
  a->add_option("--batch", batch_dir, "Align every <name>.x.* / <name>.y.* pair in a directory");

  std::string pred, gt;
  auto* e = app.add_subcommand("eval", "Time error and deviation between two warps");
  e->add_option("pred", pred, "Predicted warp (align JSON or two-column CSV)")->required();
  e->add_option("gt", gt, "Ground-truth warp")->required();

  std::uint64_t gc_seed = 1;
  int gc_instances = 5;
  int gc_knots = 12;
  auto* g = app.add_subcommand("gradcheck", "Check gradients against dense and finite differences");
  g->add_option("--seed", gc_seed, "First instance seed");
  g->add_option("--instances", gc_instances, "Random problems to check");
  g->add_option("--knots", gc_knots, "Warp knots per problem");

  std::vector<int> sizes{64, 128, 256};
  int repeats = 3;
  int bench_knots = 32;
  auto* b = app.add_subcommand("bench", "Time DTW and GDTW forward/backward passes");
  b->add_option("--sizes", sizes, "Series lengths")->delimiter(',');
  b->add_option("--repeats", repeats, "Timing repeats (minimum is reported)");
  b->add_option("--knots", bench_knots, "Warp knots");

  TrainRequest tr;
  std::string loss = "time_err";
  std::string history;
  auto* t = app.add_subcommand("train", "Train a linear feature map on synthetic pairs");
  t->add_option("--seed", tr.seed, "Seed for pairs and initial map");
  t->add_option("--pairs", tr.pairs, "Synthetic training pairs");
  t->add_option("--samples", tr.samples, "Samples per series (also warp knots)");
  t->add_option("--d-in", tr.d_in, "Input channels");
  t->add_option("--d-out", tr.d_out, "Feature channels");
  t->add_option("--nuisance", tr.nuisance, "Input channels unrelated between x and y");
  t->add_option("--severity", tr.severity, "Ground-truth slope deviation in [0, 1)");
  t->add_option("--steps", tr.config.steps, "Gradient descent steps");
  t->add_option("--lr", tr.config.learning_rate, "Learning rate");
  t->add_option("--lambda", tr.config.lambda, "Warp regularization weight");
  t->add_option("--loss", loss, "Training loss")->check(CLI::IsMember({"time_err", "mse_on_phi", "max_path_error"}));
  t->add_option("-o,--output", history, "Loss history CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::validation);
  }

  try {
    ExitCode code = ExitCode::ok;
    if (*a) {
      if (!interpolation.empty()) align.interpolation = parse_interpolation(interpolation);
      if (band >= 0.0) align.band = band;
      if (!constraints.empty()) align.constraints_path = constraints;
      if (!batch_dir.empty()) {
        if (output.empty()) throw ValidationError("--batch requires -o <directory>");
        code = cmd_align_batch(align, batch_dir, output, std::cerr);
      } else {
        if (align.x_path.empty() || align.y_path.empty()) {
          throw ValidationError("align needs two series files (or --batch)");
        }
        if (!output.empty()) align.output = output;
        code = cmd_align(align, std::cout);
      }
    } else if (*e) {
      code = cmd_eval(pred, gt, std::cout);
    } else if (*g) {
      code = cmd_gradcheck(gc_seed, gc_instances, gc_knots, std::cout);
    } else if (*b) {
      code = cmd_bench(sizes, repeats, bench_knots, std::cout);
    } else if (*t) {
      tr.config.loss = parse_loss(loss);
      if (!history.empty()) tr.output = history;
      code = cmd_train(tr, std::cout);
    }
    return static_cast<int>(code);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(ExitCode::validation);
  } catch (const InfeasibleError& err) {
    std::cerr << "infeasible: " << err.what() << '\n';
    return static_cast<int>(ExitCode::infeasible);
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return static_cast<int>(ExitCode::numerical);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(ExitCode::failure);
  }
}
