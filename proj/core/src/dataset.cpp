#include "radardepth/dataset.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace radardepth {

namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

/// Reads whitespace-separated header tokens of a netpbm-style file; comments
/// start with '#'. Leaves `pos` just past the single whitespace byte that
/// ends the last token.
std::string next_token(const std::string& s, std::size_t& pos, const fs::path& path) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') {
        ++pos;
      }
    } else if (std::isspace(static_cast<unsigned char>(s[pos])) != 0) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])) == 0) {
    ++pos;
  }
  if (start == pos) {
    throw std::runtime_error("truncated header in " + path.string());
  }
  std::string tok = s.substr(start, pos - start);
  ++pos;
  return tok;
}

int parse_int(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) {
      throw std::invalid_argument(tok);
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed integer '" + tok + "' in " + path.string());
  }
}

double parse_double(const std::string& tok, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) {
      throw std::invalid_argument(tok);
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + tok + "' in " + path.string());
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

nlohmann::json load_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_all(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void write_pgm16(const fs::path& path, const Pgm16& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + image.pixels.size() * 2);
  for (std::uint16_t p : image.pixels) {
    out.push_back(static_cast<char>(p >> 8));
    out.push_back(static_cast<char>(p & 0xFF));
  }
  write_all(path, out);
}

Pgm16 read_pgm16(const fs::path& path) {
  const std::string s = read_all(path);
  std::size_t pos = 0;
  if (next_token(s, pos, path) != "P5") {
    throw std::runtime_error("not a binary PGM: " + path.string());
  }
  Pgm16 img;
  img.width = parse_int(next_token(s, pos, path), path);
  img.height = parse_int(next_token(s, pos, path), path);
  const int maxval = parse_int(next_token(s, pos, path), path);
  if (maxval != 65535 || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error("expected a 16-bit PGM with positive size: " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (s.size() - pos < 2 * n) {
    throw std::runtime_error("truncated pixel data in " + path.string());
  }
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(s[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(s[pos + 2 * i + 1]);
    img.pixels[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

void write_gray_image(const fs::path& path, const Grid& gray) {
  Pgm16 img{gray.width(), gray.height(), {}};
  img.pixels.reserve(gray.size());
  for (double v : gray.values()) {
    img.pixels.push_back(static_cast<std::uint16_t>(std::floor(65535.0 * std::clamp(v, 0.0, 1.0) + 0.5)));
  }
  write_pgm16(path, img);
}

Grid read_gray_image(const fs::path& path) {
  const Pgm16 img = read_pgm16(path);
  Grid g(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    g[i] = img.pixels[i] / 65535.0;
  }
  return g;
}

void write_pfm(const fs::path& path, const Grid& values) {
  std::string out = "Pf\n" + std::to_string(values.width()) + " " + std::to_string(values.height()) + "\n-1.0\n";
  out.reserve(out.size() + values.size() * 4);
  for (int v = values.height() - 1; v >= 0; --v) {
    for (int u = 0; u < values.width(); ++u) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values.at(u, v)));
      for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
      }
    }
  }
  write_all(path, out);
}

Grid read_pfm(const fs::path& path) {
  const std::string s = read_all(path);
  std::size_t pos = 0;
  if (next_token(s, pos, path) != "Pf") {
    throw std::runtime_error("not a single-channel PFM: " + path.string());
  }
  const int w = parse_int(next_token(s, pos, path), path);
  const int h = parse_int(next_token(s, pos, path), path);
  const double scale = parse_double(next_token(s, pos, path), path);
  if (w <= 0 || h <= 0) {
    throw std::runtime_error("PFM with non-positive size: " + path.string());
  }
  if (!(scale < 0.0)) {
    throw std::runtime_error("only little-endian PFM (negative scale) is supported: " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (s.size() - pos < 4 * n) {
    throw std::runtime_error("truncated PFM data in " + path.string());
  }
  Grid g(w, h);
  std::size_t i = pos;
  for (int v = h - 1; v >= 0; --v) {
    for (int u = 0; u < w; ++u) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) {
        bits = (bits << 8) | static_cast<unsigned char>(s[i + static_cast<std::size_t>(b)]);
      }
      g.at(u, v) = static_cast<double>(std::bit_cast<float>(bits)) * -scale;
      i += 4;
    }
  }
  return g;
}

void write_cloud_csv(const fs::path& path, const PointCloud& cloud) {
  cloud.validate();
  const bool vel = !cloud.velocity.empty();
  std::string out = vel ? "x,y,z,vx,vy\n" : "x,y,z\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out += format_double(p.x()) + "," + format_double(p.y()) + "," + format_double(p.z());
    if (vel) {
      out += "," + format_double(cloud.velocity[i].x()) + "," + format_double(cloud.velocity[i].y());
    }
    out += "\n";
  }
  write_all(path, out);
}

PointCloud read_cloud_csv(const fs::path& path) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty point file " + path.string());
  }
  const auto header = split_csv_line(line);
  bool vel = false;
  if (header == std::vector<std::string>{"x", "y", "z", "vx", "vy"}) {
    vel = true;
  } else if (header != std::vector<std::string>{"x", "y", "z"}) {
    throw std::runtime_error("unexpected header '" + line + "' in " + path.string());
  }
  PointCloud cloud;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto cols = split_csv_line(line);
    if (cols.size() != (vel ? 5u : 3u)) {
      throw std::runtime_error("wrong column count on line " + std::to_string(lineno) + " of " + path.string());
    }
    cloud.points.emplace_back(parse_double(cols[0], path), parse_double(cols[1], path), parse_double(cols[2], path));
    if (vel) {
      cloud.velocity.emplace_back(parse_double(cols[3], path), parse_double(cols[4], path));
    }
  }
  try {
    cloud.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(e.what()) + " in " + path.string());
  }
  return cloud;
}

void write_pose_json(const fs::path& path, const Se3Pose& pose) {
  nlohmann::json j;
  std::vector<double> r;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      r.push_back(pose.rotation()(i, k));
    }
  }
  j["rotation"] = r;
  j["translation"] = {pose.translation().x(), pose.translation().y(), pose.translation().z()};
  write_all(path, j.dump(2) + "\n");
}

Se3Pose read_pose_json(const fs::path& path) {
  const auto j = load_json(path);
  try {
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) {
      throw std::runtime_error("rotation needs 9 values and translation 3");
    }
    Eigen::Matrix3d rot;
    rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    return Se3Pose(rot, Eigen::Vector3d(t[0], t[1], t[2]));
  } catch (const std::exception& e) {
    throw std::runtime_error("bad pose in " + path.string() + ": " + e.what());
  }
}

void write_intrinsics_json(const fs::path& path, const CameraIntrinsics& k) {
  const nlohmann::json j = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                            {"width", k.width}, {"height", k.height}};
  write_all(path, j.dump(2) + "\n");
}

CameraIntrinsics read_intrinsics_json(const fs::path& path) {
  const auto j = load_json(path);
  try {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
  } catch (const std::exception& e) {
    throw std::runtime_error("bad intrinsics in " + path.string() + ": " + e.what());
  }
}

void write_mer_csv(const fs::path& path, const MerMap& mer) {
  std::string out = "u,v,depth,pda\n";
  for (int v = 0; v < mer.height(); ++v) {
    for (int u = 0; u < mer.width(); ++u) {
      for (const auto& e : mer.entries(u, v)) {
        out += std::to_string(u) + "," + std::to_string(v) + "," + format_double(e.depth) + "," +
               format_double(e.pda) + "\n";
      }
    }
  }
  write_all(path, out);
}

MerMap read_mer_csv(const fs::path& path, int width, int height) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"u", "v", "depth", "pda"}) {
    throw std::runtime_error("expected header 'u,v,depth,pda' in " + path.string());
  }
  MerMap mer(width, height);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto cols = split_csv_line(line);
    if (cols.size() != 4) {
      throw std::runtime_error("wrong column count on line " + std::to_string(lineno) + " of " + path.string());
    }
    try {
      mer.add(parse_int(cols[0], path), parse_int(cols[1], path),
              {parse_double(cols[2], path), parse_double(cols[3], path)});
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string(e.what()) + " on line " + std::to_string(lineno) + " of " + path.string());
    }
  }
  return mer;
}

std::uint16_t depth_to_u16(double depth, double max_depth) {
  if (!(max_depth > 0.0)) {
    throw std::invalid_argument("depth_to_u16: max_depth must be positive");
  }
  const double clamped = std::clamp(depth, 0.0, max_depth);
  return static_cast<std::uint16_t>(std::floor(65535.0 * clamped / max_depth + 0.5));
}

void emit_depth_image(const Grid& depth, const fs::path& path, double max_depth) {
  Pgm16 img{depth.width(), depth.height(), {}};
  img.pixels.reserve(depth.size());
  for (double d : depth.values()) {
    img.pixels.push_back(depth_to_u16(d, max_depth));
  }
  write_pgm16(path, img);
}

std::string sha256_bytes(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const fs::path& path) { return sha256_bytes(read_all(path)); }

std::string frame_dir_name(int frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d", frame_index);
  return buf;
}

void write_frame(const fs::path& frame_dir, const FrameRecord& frame) {
  std::error_code ec;
  fs::create_directories(frame_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + frame_dir.string() + ": " + ec.message());
  }
  write_gray_image(frame_dir / files::kImage, frame.image);
  write_pfm(frame_dir / files::kGtDepth, frame.gt_depth.grid());
  write_cloud_csv(frame_dir / files::kLidar, frame.lidar);
  write_cloud_csv(frame_dir / files::kRadar, frame.radar);
  write_pose_json(frame_dir / files::kPose, frame.pose);
  write_intrinsics_json(frame_dir / files::kIntrinsics, frame.intrinsics);
  if (frame.mer) {
    write_mer_csv(frame_dir / files::kMer, *frame.mer);
  }
}

namespace {

bool is_frame_dir(const fs::directory_entry& e) {
  return e.is_directory() && e.path().filename().string().rfind("frame_", 0) == 0;
}

std::vector<fs::path> sorted_children(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset Dataset::open(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw std::runtime_error("dataset directory not found: " + root.string());
  }
  Dataset ds;
  ds.root_ = root;
  const auto children = sorted_children(root);
  const bool flat = std::any_of(children.begin(), children.end(), [](const fs::path& p) {
    return is_frame_dir(fs::directory_entry(p));
  });
  auto add_sequence = [&](const fs::path& seq_dir, const std::string& prefix) {
    int index = 0;
    for (const auto& p : sorted_children(seq_dir)) {
      if (!is_frame_dir(fs::directory_entry(p))) {
        continue;
      }
      FrameRef f;
      f.id = prefix + p.filename().string();
      f.dir = p;
      f.sequence = ds.sequence_count_;
      f.index = index++;
      ds.frames_.push_back(std::move(f));
    }
    if (index > 0) {
      ++ds.sequence_count_;
    }
  };
  if (flat) {
    add_sequence(root, "");
  } else {
    for (const auto& p : children) {
      if (fs::is_directory(p)) {
        add_sequence(p, p.filename().string() + "/");
      }
    }
  }
  if (ds.frames_.empty()) {
    throw std::runtime_error("no frame_* directories under " + root.string());
  }
  return ds;
}

std::vector<const FrameRef*> Dataset::history(const FrameRef& frame, int count) const {
  std::vector<const FrameRef*> out;
  for (const auto& f : frames_) {
    if (f.sequence == frame.sequence && f.index <= frame.index && f.index > frame.index - count) {
      out.push_back(&f);
    }
  }
  return out;
}

std::vector<fs::path> Dataset::all_files() const {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (e.is_regular_file()) {
      out.push_back(fs::relative(e.path(), root_));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void AccessLog::set_phase(std::string phase) {
  std::lock_guard lock(mutex_);
  phase_ = std::move(phase);
}

void AccessLog::record(const std::string& frame, const std::string& file) {
  std::lock_guard lock(mutex_);
  entries_.push_back({phase_, frame, file});
}

std::vector<AccessLog::Entry> AccessLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

fs::path FrameReader::touch(const FrameRef& f, const char* file) const {
  if (log_ != nullptr) {
    log_->record(f.id, file);
  }
  return f.dir / file;
}

Grid FrameReader::image(const FrameRef& f) const { return read_gray_image(touch(f, files::kImage)); }

DenseDepthImage FrameReader::gt_depth(const FrameRef& f) const {
  const auto path = touch(f, files::kGtDepth);
  try {
    return DenseDepthImage(read_pfm(path));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(e.what()) + " in " + path.string());
  }
}

PointCloud FrameReader::lidar(const FrameRef& f) const { return read_cloud_csv(touch(f, files::kLidar)); }
PointCloud FrameReader::radar(const FrameRef& f) const { return read_cloud_csv(touch(f, files::kRadar)); }
Se3Pose FrameReader::pose(const FrameRef& f) const { return read_pose_json(touch(f, files::kPose)); }

CameraIntrinsics FrameReader::intrinsics(const FrameRef& f) const {
  return read_intrinsics_json(touch(f, files::kIntrinsics));
}

bool FrameReader::has_mer(const FrameRef& f) const { return fs::exists(f.dir / files::kMer); }

MerMap FrameReader::mer(const FrameRef& f) const {
  const CameraIntrinsics k = read_intrinsics_json(f.dir / files::kIntrinsics);
  return read_mer_csv(touch(f, files::kMer), k.width, k.height);
}

}  // namespace radardepth
