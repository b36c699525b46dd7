#include "unest/export_maps.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "unest/untf.hpp"

namespace fs = std::filesystem;

namespace unest {
namespace {

ImageGrid render_grid(const std::vector<double>& values, int h, int w) {
  double lo = values[0];
  double hi = values[0];
  for (const double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  ImageGrid img(h, w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    img.pixels[i] = span > 0.0 ? (values[i] - lo) / span : 0.0;
  }
  return img;
}

}  // namespace

void export_maps(const UNestParams& params, const UNestConfig& cfg,
                 const ImageGrid& input, const std::string& out_dir,
                 const ExportMapsOptions& options) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  ForwardTrace trace;
  const Tensor x = normalize_for_model(input);
  const GeneratorOutput out = unest_forward(x, params, cfg,
                                            ScopeSource::kPredicted, nullptr,
                                            &trace);
  const ImageGrid translated = denormalize(out.image);
  save_pgm(translated, (dir / "translated.pgm").string());

  const int gh = cfg.grid_h();
  const int gw = cfg.grid_w();
  save_untf((dir / "predicted_mask.untf").string(),
            Tensor::from_data({gh, gw}, out.mask.probs), 1);
  save_pgm(render_grid(out.mask.probs, gh, gw),
           (dir / "predicted_mask.pgm").string());

  const int n = gh * gw;
  for (const TokenIndex& q : options.queries) {
    if (q.row < 0 || q.row >= gh || q.col < 0 || q.col >= gw) {
      throw std::out_of_range("export_maps: query (" + std::to_string(q.row) +
                              "," + std::to_string(q.col) + ") outside grid");
    }
    const int flat = q.row * gw + q.col;
    for (std::size_t block = 0; block < trace.blocks.size(); ++block) {
      const AttentionTrace& bt = trace.blocks[block];
      for (std::size_t head = 0; head < bt.head_rows.size(); ++head) {
        std::vector<double> row(static_cast<std::size_t>(n));
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
          row[static_cast<std::size_t>(j)] =
              bt.head_rows[head][static_cast<std::size_t>(flat) * n + j];
          total += row[static_cast<std::size_t>(j)];
        }
        if (std::abs(total - 1.0) > 1e-9) {
          throw std::logic_error("export_maps: attention row sums to " +
                                 std::to_string(total) + " for query " +
                                 std::to_string(flat));
        }
        char name[64];
        std::snprintf(name, sizeof name, "attention_b%zu_h%zu_q%d_%d", block,
                      head, q.row, q.col);
        save_untf((dir / (std::string(name) + ".untf")).string(),
                  Tensor::from_data({gh, gw}, row), 1);
        save_pgm(render_grid(row, gh, gw),
                 (dir / (std::string(name) + ".pgm")).string());
      }
    }
  }

  if (options.target != nullptr) {
    const ImageGrid& target = *options.target;
    if (target.height != translated.height || target.width != translated.width) {
      throw std::invalid_argument("export_maps: target size mismatch");
    }
    ImageGrid error(translated.height, translated.width);
    for (std::size_t i = 0; i < error.size(); ++i) {
      error.pixels[i] = std::abs(translated.pixels[i] - target.pixels[i]);
    }
    save_untf((dir / "error_map.untf").string(),
              Tensor::from_data({error.height, error.width}, error.pixels), 1);
    save_pgm(error, (dir / "error_map.pgm").string());
  }
}

}  // namespace unest
