#include "unest/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace unest {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

const char* domain_name(Domain d) {
  return d == Domain::kX ? "x" : "y";
}

const char* direction_name(Direction d) {
  return d == Direction::kXY ? "xy" : "yx";
}

Direction parse_direction(const std::string& s) {
  if (s == "xy") return Direction::kXY;
  if (s == "yx") return Direction::kYX;
  throw std::invalid_argument("unknown direction '" + s + "' (xy|yx)");
}

DatasetPart& UnpairedDataset::part(Split s, Domain d) {
  switch (s) {
    case Split::kTrain: return d == Domain::kX ? train_x : train_y;
    case Split::kVal: return d == Domain::kX ? val_x : val_y;
    case Split::kTest: return d == Domain::kX ? test_x : test_y;
  }
  throw std::logic_error("bad split");
}

const DatasetPart& UnpairedDataset::part(Split s, Domain d) const {
  return const_cast<UnpairedDataset*>(this)->part(s, d);
}

namespace {

constexpr Split kSplits[] = {Split::kTrain, Split::kVal, Split::kTest};
constexpr Domain kDomains[] = {Domain::kX, Domain::kY};

std::string sample_stem(Split s, Domain d, std::size_t i) {
  char idx[8];
  std::snprintf(idx, sizeof idx, "%04zu", i);
  return std::string(split_name(s)) + "_" + domain_name(d) + "_" + idx;
}

Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::runtime_error("bad split '" + s + "' in " + where);
}

Domain parse_domain(const std::string& s, const std::string& where) {
  if (s == "x") return Domain::kX;
  if (s == "y") return Domain::kY;
  throw std::runtime_error("bad domain '" + s + "' in " + where);
}

}  // namespace

void write_dataset(const UnpairedDataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  fs::create_directories(fs::path(dir) / "targets");

  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  for (const Split s : kSplits) {
    for (const Domain d : kDomains) {
      const DatasetPart& part = ds.part(s, d);
      for (std::size_t i = 0; i < part.images.size(); ++i) {
        const std::string stem = sample_stem(s, d, i);
        const std::string img_rel = "images/" + stem + ".pgm";
        const std::string mask_rel = "masks/" + stem + ".untf";
        save_pgm(part.images[i], (fs::path(dir) / img_rel).string());
        save_mask(part.masks[i], (fs::path(dir) / mask_rel).string());
        manifest << split_name(s) << '\t' << domain_name(d) << '\t' << img_rel
                 << '\t' << mask_rel << '\n';
      }
    }
  }
  manifest.close();

  std::ofstream pairs(fs::path(dir) / "pairs.tsv");
  if (!pairs) throw std::runtime_error("cannot write pairs.tsv in " + dir);
  for (std::size_t i = 0; i < ds.test_targets_xy.size(); ++i) {
    const std::string input_rel = "images/" + sample_stem(Split::kTest, Domain::kX, i) + ".pgm";
    const std::string target_rel = "targets/" + sample_stem(Split::kTest, Domain::kX, i) + "_as_y.pgm";
    save_pgm(ds.test_targets_xy[i], (fs::path(dir) / target_rel).string());
    pairs << "xy\t" << input_rel << '\t' << target_rel << '\n';
  }
  for (std::size_t i = 0; i < ds.test_targets_yx.size(); ++i) {
    const std::string input_rel = "images/" + sample_stem(Split::kTest, Domain::kY, i) + ".pgm";
    const std::string target_rel = "targets/" + sample_stem(Split::kTest, Domain::kY, i) + "_as_x.pgm";
    save_pgm(ds.test_targets_yx[i], (fs::path(dir) / target_rel).string());
    pairs << "yx\t" << input_rel << '\t' << target_rel << '\n';
  }
}

UnpairedDataset load_dataset(const std::string& dir, double sigma) {
  const fs::path manifest_path = fs::path(dir) / "manifest.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) {
    throw std::runtime_error("cannot open manifest " + manifest_path.string());
  }
  UnpairedDataset ds;
  std::map<std::string, std::pair<Split, std::size_t>> x_index_by_path;
  std::map<std::string, std::pair<Split, std::size_t>> y_index_by_path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string split_s, domain_s, img_rel, mask_rel;
    if (!std::getline(row, split_s, '\t') || !std::getline(row, domain_s, '\t') ||
        !std::getline(row, img_rel, '\t') || !std::getline(row, mask_rel)) {
      throw std::runtime_error("malformed manifest line " +
                               std::to_string(line_no) + " in " +
                               manifest_path.string());
    }
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
    const Split split = parse_split(split_s, where);
    const Domain domain = parse_domain(domain_s, where);
    DatasetPart& part = ds.part(split, domain);
    part.images.push_back(load_pgm((fs::path(dir) / img_rel).string()));
    part.masks.push_back(load_mask((fs::path(dir) / mask_rel).string(), sigma));
    const ImageGrid& img = part.images.back();
    if (ds.side == 0) ds.side = img.height;
    if (img.height != ds.side || img.width != ds.side) {
      throw std::runtime_error("inconsistent image size at " + where);
    }
    const PatchMask& m = part.masks.back();
    if (m.grid_h > 0 && ds.side % m.grid_h == 0) {
      ds.patch = ds.side / m.grid_h;
    }
    auto& index = domain == Domain::kX ? x_index_by_path : y_index_by_path;
    index[img_rel] = {split, part.images.size() - 1};
  }

  const fs::path pairs_path = fs::path(dir) / "pairs.tsv";
  std::ifstream pairs(pairs_path);
  if (pairs) {
    ds.test_targets_xy.resize(ds.test_x.images.size());
    ds.test_targets_yx.resize(ds.test_y.images.size());
    line_no = 0;
    while (std::getline(pairs, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string direction, input_rel, target_rel;
      if (!std::getline(row, direction, '\t') ||
          !std::getline(row, input_rel, '\t') || !std::getline(row, target_rel)) {
        throw std::runtime_error("malformed pairs line " + std::to_string(line_no));
      }
      const auto& index = direction == "xy" ? x_index_by_path : y_index_by_path;
      const auto it = index.find(input_rel);
      if (it == index.end() || it->second.first != Split::kTest) {
        throw std::runtime_error("pairs.tsv references unknown test input " + input_rel);
      }
      ImageGrid target = load_pgm((fs::path(dir) / target_rel).string());
      if (direction == "xy") {
        ds.test_targets_xy[it->second.second] = std::move(target);
      } else if (direction == "yx") {
        ds.test_targets_yx[it->second.second] = std::move(target);
      } else {
        throw std::runtime_error("bad direction '" + direction + "' in pairs.tsv");
      }
    }
  }
  return ds;
}

}  // namespace unest
