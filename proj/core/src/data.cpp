#include "klda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "klda/rng.hpp"

namespace klda {

void Dataset::validate() const {
  require(inputs.allFinite(), "Dataset: non-finite inputs");
  if (labeled()) {
    require(static_cast<int>(labels.size()) == size(),
            "Dataset: one label per row required");
    require(n_classes >= 2, "Dataset: labeled data needs n_classes >= 2");
    for (int y : labels)
      require(y >= 0 && y < n_classes, "Dataset: label out of range");
  }
}

UnlabeledDataset strip_labels(const Dataset& d) {
  return UnlabeledDataset{d.inputs, d.domain, d.angle_deg};
}

DomainPair::DomainPair(Dataset source, Dataset target)
    : source_(std::move(source)), target_(std::move(target)) {
  source_.validate();
  target_.validate();
  require(source_.labeled(), "DomainPair: source must be labeled");
  require(source_.dim() == target_.dim(), "DomainPair: input dims differ");
  if (target_.labeled())
    require(source_.n_classes == target_.n_classes,
            "DomainPair: class counts differ");
}

Dataset make_rotated_blobs(int n_per_class, int n_classes, double radius,
                           double spread, double angle_deg,
                           std::uint64_t seed) {
  require(n_classes >= 2, "make_rotated_blobs: need at least two classes");
  require(n_per_class >= 1, "make_rotated_blobs: need at least one point per class");
  require(spread > 0.0, "make_rotated_blobs: spread must be positive");

  const int n = n_per_class * n_classes;
  Dataset d;
  d.inputs.resize(n, 2);
  d.labels.resize(static_cast<std::size_t>(n));
  d.n_classes = n_classes;
  d.angle_deg = angle_deg;
  d.seed = seed;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "blobs%g", angle_deg);
    d.domain = buf;
  }

  Rng rng(derive_seed(seed, "blobs"));
  const double rad = angle_deg * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  int row = 0;
  for (int k = 0; k < n_classes; ++k) {
    const double theta = 2.0 * M_PI * k / n_classes;
    const double cx = radius * std::cos(theta);
    const double cy = radius * std::sin(theta);
    for (int i = 0; i < n_per_class; ++i, ++row) {
      const double x = cx + spread * rng.normal();
      const double y = cy + spread * rng.normal();
      d.inputs(row, 0) = c * x - s * y;
      d.inputs(row, 1) = s * x + c * y;
      d.labels[static_cast<std::size_t>(row)] = k;
    }
  }
  return d;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open IDX image file: " + images_path);
  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImageMagic) {
    std::ostringstream msg;
    msg << "bad IDX image magic in " << images_path << ": expected "
        << kImageMagic << ", got " << img_magic;
    throw DataError(msg.str());
  }
  const std::uint32_t n = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open IDX label file: " + labels_path);
  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != kLabelMagic) {
    std::ostringstream msg;
    msg << "bad IDX label magic in " << labels_path << ": expected "
        << kLabelMagic << ", got " << lab_magic;
    throw DataError(msg.str());
  }
  const std::uint32_t n_lab = read_be32(lab, labels_path);
  if (n != n_lab)
    throw DataError("IDX image/label counts differ: " + images_path);

  const std::size_t px = std::size_t(rows) * cols;
  std::vector<unsigned char> buf(px);
  Dataset d;
  d.inputs.resize(n, static_cast<Eigen::Index>(px));
  d.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(px));
    if (!img) throw DataError("truncated IDX image data: " + images_path);
    for (std::size_t j = 0; j < px; ++j)
      d.inputs(i, static_cast<Eigen::Index>(j)) = buf[j] / 255.0;
    char y;
    lab.read(&y, 1);
    if (!lab) throw DataError("truncated IDX label data: " + labels_path);
    d.labels[i] = static_cast<unsigned char>(y);
  }
  d.n_classes = 10;
  d.domain = "idx";
  return d;
}

void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path) {
  d.validate();
  require(d.labeled(), "write_idx: dataset must be labeled");
  const int side = static_cast<int>(std::lround(std::sqrt(double(d.dim()))));
  require(side * side == d.dim(), "write_idx: rows must be square images");

  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  if (!img) throw DataError("cannot write IDX image file: " + images_path);
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(d.size()));
  write_be32(img, static_cast<std::uint32_t>(side));
  write_be32(img, static_cast<std::uint32_t>(side));
  std::vector<unsigned char> buf(static_cast<std::size_t>(d.dim()));
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) {
      double v = std::clamp(d.inputs(i, j), 0.0, 1.0);
      buf[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::lround(v * 255.0));
    }
    img.write(reinterpret_cast<const char*>(buf.data()), d.dim());
  }

  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  if (!lab) throw DataError("cannot write IDX label file: " + labels_path);
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (int y : d.labels) {
    char b = static_cast<char>(y);
    lab.write(&b, 1);
  }
}

Matrix rotate_image(const Matrix& img, double degrees) {
  require(img.rows() == img.cols(), "rotate_image: image must be square");
  const Eigen::Index n = img.rows();
  const double ctr = (static_cast<double>(n) - 1.0) / 2.0;
  const double rad = degrees * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index col = 0; col < n; ++col) {
      // math coordinates, y pointing up
      const double xo = static_cast<double>(col) - ctr;
      const double yo = ctr - static_cast<double>(r);
      // inverse rotation locates the source sample
      const double xs = c * xo + s * yo;
      const double ys = -s * xo + c * yo;
      const double sc = xs + ctr;
      const double sr = ctr - ys;
      const double fr = std::floor(sr), fc = std::floor(sc);
      const double wr = sr - fr, wc = sc - fc;
      auto at = [&](double rr, double cc) -> double {
        if (rr < 0 || rr >= static_cast<double>(n) || cc < 0 ||
            cc >= static_cast<double>(n))
          return 0.0;
        return img(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(cc));
      };
      double v = (1 - wr) * ((1 - wc) * at(fr, fc) + wc * at(fr, fc + 1)) +
                 wr * ((1 - wc) * at(fr + 1, fc) + wc * at(fr + 1, fc + 1));
      out(r, col) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Dataset rotate_dataset_images(const Dataset& d, double degrees) {
  const int side = static_cast<int>(std::lround(std::sqrt(double(d.dim()))));
  require(side * side == d.dim(),
          "rotate_dataset_images: rows must be square images");
  Dataset out = d;
  out.angle_deg = degrees;
  Matrix grid(side, side);
  for (int i = 0; i < d.size(); ++i) {
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) grid(r, c) = d.inputs(i, r * side + c);
    Matrix rot = rotate_image(grid, degrees);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) out.inputs(i, r * side + c) = rot(r, c);
  }
  return out;
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<int>& idx) {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(idx.size()), d.dim());
  if (d.labeled()) out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = d.inputs.row(idx[i]);
    if (d.labeled()) out.labels[i] = d.labels[static_cast<std::size_t>(idx[i])];
  }
  out.n_classes = d.n_classes;
  out.domain = d.domain;
  out.angle_deg = d.angle_deg;
  out.seed = d.seed;
  return out;
}

}  // namespace

SplitResult split_80_20(const Dataset& d, std::uint64_t seed) {
  require(d.size() >= 5, "split_80_20: need at least five examples");
  std::vector<int> idx(static_cast<std::size_t>(d.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx.begin(), idx.end());
  const std::size_t cut =
      static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(d.size())));
  std::vector<int> train_idx(idx.begin(), idx.begin() + static_cast<long>(cut));
  std::vector<int> held_idx(idx.begin() + static_cast<long>(cut), idx.end());
  return {take_rows(d, train_idx), take_rows(d, held_idx)};
}

std::vector<BatchPair> minibatch_stream(const Dataset& train_src,
                                        const UnlabeledDataset& train_tgt,
                                        int batch_size,
                                        std::uint64_t epoch_seed) {
  require(train_src.labeled(), "minibatch_stream: source must be labeled");
  require(batch_size >= 1, "minibatch_stream: batch size must be positive");
  require(batch_size <= train_src.size() && batch_size <= train_tgt.size(),
          "minibatch_stream: batch size exceeds a training set");

  std::vector<int> src_idx(static_cast<std::size_t>(train_src.size()));
  std::iota(src_idx.begin(), src_idx.end(), 0);
  std::vector<int> tgt_idx(static_cast<std::size_t>(train_tgt.size()));
  std::iota(tgt_idx.begin(), tgt_idx.end(), 0);
  Rng src_rng(derive_seed(epoch_seed, "shuffle-src"));
  Rng tgt_rng(derive_seed(epoch_seed, "shuffle-tgt"));
  src_rng.shuffle(src_idx.begin(), src_idx.end());
  tgt_rng.shuffle(tgt_idx.begin(), tgt_idx.end());

  const int n_batches = train_src.size() / batch_size;
  std::vector<BatchPair> out;
  out.reserve(static_cast<std::size_t>(n_batches));
  std::size_t tgt_cursor = 0;
  for (int b = 0; b < n_batches; ++b) {
    BatchPair pair;
    pair.source.inputs.resize(batch_size, train_src.dim());
    pair.source.labels.resize(static_cast<std::size_t>(batch_size));
    pair.target.inputs.resize(batch_size, train_tgt.dim());
    for (int i = 0; i < batch_size; ++i) {
      const int si = src_idx[static_cast<std::size_t>(b * batch_size + i)];
      pair.source.inputs.row(i) = train_src.inputs.row(si);
      pair.source.labels[static_cast<std::size_t>(i)] =
          train_src.labels[static_cast<std::size_t>(si)];
      pair.target.inputs.row(i) =
          train_tgt.inputs.row(tgt_idx[tgt_cursor % tgt_idx.size()]);
      ++tgt_cursor;
    }
    out.push_back(std::move(pair));
  }
  return out;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  d.validate();
  require(d.labeled(), "write_dataset_csv: dataset must be labeled");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write CSV: " + path);
  for (int j = 0; j < d.dim(); ++j) out << "x" << j << ",";
  out << "label\n";
  char buf[40];
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", d.inputs(i, j));
      out << buf << ",";
    }
    out << d.labels[static_cast<std::size_t>(i)] << "\n";
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV: " + path);
  int dims = 0;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) {
      if (col == "label") break;
      ++dims;
    }
  }
  if (dims == 0) throw DataError("CSV header carries no feature columns: " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    for (int j = 0; j < dims; ++j) {
      if (!std::getline(ss, cell, ','))
        throw DataError("short CSV row in " + path);
      row.push_back(std::stod(cell));
    }
    if (!std::getline(ss, cell, ',')) throw DataError("missing label in " + path);
    labels.push_back(std::stoi(cell));
    rows.push_back(std::move(row));
  }

  Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows.size()), dims);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dims; ++j)
      d.inputs(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  d.labels = std::move(labels);
  d.n_classes = d.labels.empty()
                    ? 0
                    : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  d.n_classes = std::max(d.n_classes, 2);
  d.domain = "csv";
  return d;
}

// ---------------------------------------------------------------------------
// Procedural digit glyphs
// ---------------------------------------------------------------------------

namespace {

using Point = std::pair<double, double>;
using Polyline = std::vector<Point>;

void append_arc(Polyline& pl, double cx, double cy, double rx, double ry,
                double a0_deg, double a1_deg, int segments = 24) {
  for (int i = 0; i <= segments; ++i) {
    const double t =
        (a0_deg + (a1_deg - a0_deg) * i / segments) * M_PI / 180.0;
    pl.emplace_back(cx + rx * std::cos(t), cy + ry * std::sin(t));
  }
}

Polyline arc(double cx, double cy, double rx, double ry, double a0, double a1) {
  Polyline pl;
  append_arc(pl, cx, cy, rx, ry, a0, a1);
  return pl;
}

// Stroke skeletons on the unit square, y pointing up.
std::vector<Polyline> digit_strokes(int digit) {
  switch (digit) {
    case 0:
      return {arc(0.50, 0.50, 0.27, 0.40, 90, 450)};
    case 1:
      return {{{0.34, 0.70}, {0.52, 0.90}}, {{0.52, 0.90}, {0.52, 0.08}}};
    case 2: {
      Polyline top = arc(0.50, 0.66, 0.25, 0.24, 160, 0);
      top.insert(top.end(), {{0.75, 0.66}, {0.52, 0.40}, {0.26, 0.10}});
      return {top, {{0.26, 0.10}, {0.78, 0.10}}};
    }
    case 3:
      return {arc(0.46, 0.69, 0.23, 0.21, 150, -70),
              arc(0.46, 0.29, 0.25, 0.23, 70, -150)};
    case 4:
      return {{{0.60, 0.90}, {0.23, 0.40}},
              {{0.23, 0.40}, {0.80, 0.40}},
              {{0.62, 0.74}, {0.62, 0.08}}};
    case 5:
      return {{{0.72, 0.90}, {0.30, 0.90}},
              {{0.30, 0.90}, {0.28, 0.54}},
              arc(0.46, 0.32, 0.25, 0.24, 128, -130)};
    case 6: {
      Polyline sweep = {{0.66, 0.90}, {0.50, 0.72}, {0.38, 0.52}, {0.33, 0.36}};
      return {sweep, arc(0.48, 0.27, 0.20, 0.19, 0, 360)};
    }
    case 7:
      return {{{0.24, 0.90}, {0.76, 0.90}}, {{0.76, 0.90}, {0.42, 0.08}}};
    case 8:
      return {arc(0.50, 0.67, 0.20, 0.18, 90, 450),
              arc(0.50, 0.285, 0.24, 0.22, 90, 450)};
    case 9: {
      return {arc(0.52, 0.66, 0.21, 0.19, 0, 360),
              {{0.73, 0.64}, {0.67, 0.34}, {0.58, 0.08}}};
    }
    default:
      throw ContractViolation("digit_strokes: digit out of range");
  }
}

double dist_to_segment(double px, double py, const Point& a, const Point& b) {
  const double vx = b.first - a.first, vy = b.second - a.second;
  const double wx = px - a.first, wy = py - a.second;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.first + t * vx), dy = py - (a.second + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Renders one jittered digit onto a 28x28 grid, quantized to the byte grid
// so an IDX write/read round-trips exactly.
void render_glyph(int digit, Rng& rng, double* out_row) {
  constexpr int kSide = 28;
  auto strokes = digit_strokes(digit);

  // per-sample affine jitter around the glyph center
  const double rot = rng.uniform(-0.16, 0.16);  // about +-9 degrees
  const double sx = rng.uniform(0.80, 1.10);
  const double sy = rng.uniform(0.80, 1.10);
  const double shear = rng.uniform(-0.18, 0.18);
  const double tx = rng.uniform(-0.06, 0.06);
  const double ty = rng.uniform(-0.06, 0.06);
  const double cr = std::cos(rot), srot = std::sin(rot);

  for (auto& stroke : strokes) {
    for (auto& p : stroke) {
      double x = (p.first - 0.5 + rng.uniform(-0.015, 0.015)) * sx;
      double y = (p.second - 0.5 + rng.uniform(-0.015, 0.015)) * sy;
      x += shear * y;
      const double xr = cr * x - srot * y;
      const double yr = srot * x + cr * y;
      // unit square -> pixel coordinates (row down)
      p.first = (xr + 0.5 + tx) * kSide - 0.5;
      p.second = (0.5 - (yr + ty)) * kSide - 0.5;
    }
  }

  const double width = rng.uniform(0.85, 1.55);  // gaussian pen radius, px
  const double intensity = rng.uniform(0.82, 1.0);
  const double reach = 3.0 * width;

  double img[kSide * kSide] = {};
  for (const auto& stroke : strokes) {
    for (std::size_t s = 0; s + 1 < stroke.size(); ++s) {
      const Point& a = stroke[s];
      const Point& b = stroke[s + 1];
      const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.first, b.first) - reach)));
      const int c1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.first, b.first) + reach)));
      const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.second, b.second) - reach)));
      const int r1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.second, b.second) + reach)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          const double d = dist_to_segment(c, r, a, b);
          const double v = std::exp(-d * d / (2.0 * width * width));
          double& px = img[r * kSide + c];
          px = std::max(px, v);
        }
      }
    }
  }

  for (int j = 0; j < kSide * kSide; ++j) {
    double v = intensity * img[j];
    if (rng.uniform() < 0.008) v = std::max(v, rng.uniform(0.1, 0.45));
    v = std::clamp(v, 0.0, 1.0);
    out_row[j] = std::lround(v * 255.0) / 255.0;
  }
}

}  // namespace

Dataset make_digit_glyphs(int n, std::uint64_t seed) {
  require(n >= 1, "make_digit_glyphs: need at least one image");
  Dataset d;
  d.inputs.resize(n, 28 * 28);
  d.labels.resize(static_cast<std::size_t>(n));
  d.n_classes = 10;
  d.domain = "glyphs";
  d.seed = seed;
  double buf[28 * 28];
  for (int i = 0; i < n; ++i) {
    const int digit = i % 10;
    Rng rng(derive_seed(seed, "glyph", static_cast<std::uint64_t>(i)));
    render_glyph(digit, rng, buf);
    for (int j = 0; j < 28 * 28; ++j) d.inputs(i, j) = buf[j];
    d.labels[static_cast<std::size_t>(i)] = digit;
  }
  return d;
}

std::vector<Dataset> build_rotated_domains(const Dataset& base,
                                           const std::vector<double>& angles,
                                           int per_domain, std::uint64_t seed) {
  base.validate();
  require(base.labeled(), "build_rotated_domains: base corpus must be labeled");
  require(per_domain >= 1, "build_rotated_domains: per_domain must be positive");
  require(static_cast<std::size_t>(base.size()) >=
              angles.size() * static_cast<std::size_t>(per_domain),
          "build_rotated_domains: base corpus too small for disjoint domains");

  std::vector<int> order(static_cast<std::size_t>(base.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "domains"));
  rng.shuffle(order.begin(), order.end());

  std::vector<Dataset> out;
  for (std::size_t d = 0; d < angles.size(); ++d) {
    std::vector<int> idx(order.begin() + static_cast<long>(d) * per_domain,
                         order.begin() + static_cast<long>(d + 1) * per_domain);
    Dataset chunk = take_rows(base, idx);
    Dataset rotated = rotate_dataset_images(chunk, angles[d]);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "M%g", angles[d]);
    rotated.domain = buf;
    rotated.seed = seed;
    out.push_back(std::move(rotated));
  }
  return out;
}

}  // namespace klda
