// donald-d: structure-tensor analysis of transformer hidden states.
//
//   donald-d analyze   states.npy --out report.json
//   donald-d visualize states.npy --out flow.svg
//   donald-d compare   a.npy b.npy --highlight-a 3 --highlight-b 3 --out pair.svg
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "donald/commands.hpp"

namespace {

using namespace donald;

struct CommonFlags {
  std::string normalize = "row";
  double sigma_grad = kDefaultSigmaGrad;
  double sigma_tensor = kDefaultSigmaTensor;
  std::string layout = "auto";
};

struct PlotFlags {
  int cell_size = PlotSpec{}.cell_size_px;
  double fill = PlotSpec{}.ellipse_fill_fraction;
  bool no_ellipses = false;
  bool no_token_labels = false;
  bool no_layer_labels = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--normalize", f.normalize, "Min-max normalization scope")
      ->check(CLI::IsMember({"row", "column", "global", "none"}))
      ->capture_default_str();
  cmd->add_option("--sigma-grad", f.sigma_grad, "Gaussian scale for derivative fields")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--sigma-tensor", f.sigma_tensor, "Gaussian integration scale for second moments")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--layout", f.layout, "Axis order of the input array")
      ->check(CLI::IsMember({"auto", "LTH", "TLH"}))
      ->capture_default_str();
}

void add_plot(CLI::App* cmd, PlotFlags& f) {
  cmd->add_option("--cell-size", f.cell_size, "Tile edge length in pixels (>= 8)")->capture_default_str();
  cmd->add_option("--fill-fraction", f.fill, "Share of the half-tile the largest ellipse may occupy")
      ->capture_default_str();
  cmd->add_flag("--no-ellipses", f.no_ellipses, "Draw tiles only");
  cmd->add_flag("--no-token-labels", f.no_token_labels, "Omit token labels");
  cmd->add_flag("--no-layer-labels", f.no_layer_labels, "Omit layer labels");
}

AnalysisParams to_params(const CommonFlags& f) {
  AnalysisParams p;
  p.normalization = *parse_normalization(f.normalize);
  p.sigma_grad_x = p.sigma_grad_y = f.sigma_grad;
  p.sigma_tensor = f.sigma_tensor;
  return p;
}

LayoutHint to_hint(const std::string& s) {
  if (s == "LTH") return LayoutHint::LTH;
  if (s == "TLH") return LayoutHint::TLH;
  return LayoutHint::Auto;
}

PlotSpec to_plot(const PlotFlags& f, const std::vector<std::size_t>& highlight) {
  PlotSpec spec;
  spec.cell_size_px = f.cell_size;
  spec.ellipse_fill_fraction = f.fill;
  spec.show_ellipses = !f.no_ellipses;
  spec.show_token_labels = !f.no_token_labels;
  spec.show_layer_labels = !f.no_layer_labels;
  spec.highlight_columns = {highlight.begin(), highlight.end()};
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-tensor analysis of information flow in transformer hidden states", "donald-d"};
  app.require_subcommand(1);

  CommonFlags common;
  PlotFlags plot;
  std::string input, input_b, out;
  double threshold = kDefaultUtilizationThreshold;
  std::vector<std::size_t> highlight, highlight_a, highlight_b;

  auto* analyze_cmd = app.add_subcommand("analyze", "Write a JSON report and print per-layer utilization");
  analyze_cmd->add_option("input", input, "Hidden states (.npy; sidecar .meta.json is picked up)")->required();
  analyze_cmd->add_option("--out", out, "Report path")->required();
  analyze_cmd->add_option("--utilization-threshold", threshold, "Flag layers below this utilization")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  add_common(analyze_cmd, common);

  auto* visualize_cmd = app.add_subcommand("visualize", "Render the flow field as SVG");
  visualize_cmd->add_option("input", input, "Hidden states (.npy)")->required();
  visualize_cmd->add_option("--out", out, "SVG path")->required();
  visualize_cmd->add_option("--highlight", highlight, "Token columns to outline, e.g. 2,5")->delimiter(',');
  add_common(visualize_cmd, common);
  add_plot(visualize_cmd, plot);

  auto* compare_cmd = app.add_subcommand("compare", "Render a minimal pair and print utilization deltas");
  compare_cmd->add_option("input_a", input, "First hidden-state file (.npy)")->required();
  compare_cmd->add_option("input_b", input_b, "Second hidden-state file (.npy)")->required();
  compare_cmd->add_option("--out", out, "SVG path")->required();
  compare_cmd->add_option("--highlight", highlight, "Columns to outline in both panels")->delimiter(',');
  compare_cmd->add_option("--highlight-a", highlight_a, "Columns to outline in panel a")->delimiter(',');
  compare_cmd->add_option("--highlight-b", highlight_b, "Columns to outline in panel b")->delimiter(',');
  add_common(compare_cmd, common);
  add_plot(compare_cmd, plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*analyze_cmd) {
      std::cout << cmd_analyze({input, to_hint(common.layout), to_params(common), threshold, out});
    } else if (*visualize_cmd) {
      std::cout << cmd_visualize({input, to_hint(common.layout), to_params(common), to_plot(plot, highlight), out});
    } else {
      CompareOptions opt;
      opt.input_a = input;
      opt.input_b = input_b;
      opt.layout = to_hint(common.layout);
      opt.params = to_params(common);
      opt.plot = to_plot(plot, {});
      opt.highlight_a = {highlight.begin(), highlight.end()};
      opt.highlight_a.insert(highlight_a.begin(), highlight_a.end());
      opt.highlight_b = {highlight.begin(), highlight.end()};
      opt.highlight_b.insert(highlight_b.begin(), highlight_b.end());
      opt.out = out;
      std::cout << cmd_compare(opt);
    }
  } catch (const Error& e) {
    std::cerr << "donald-d: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "donald-d: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
