#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "augnet/trainer.hpp"

namespace augnet {

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// epoch,train_loss,train_acc,val_acc,test_acc followed by w_l_q,mu_l_q,range_l_q
/// for every layer l and transform q (zero-based).
std::string epochs_csv(const std::vector<EpochRecord>& history, const std::vector<std::size_t>& transforms_per_layer);

/// Shortest round-trip decimal form.
std::string format_double(double v);

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Stacked line charts in one SVG document.
std::string svg_line_charts(const std::vector<Panel>& panels);

}  // namespace augnet
