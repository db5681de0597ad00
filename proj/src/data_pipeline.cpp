#include "aelpn/data_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aelpn/errors.hpp"

namespace aelpn {

namespace {

[[noreturn]] void pnm_fail(const std::string& path, std::size_t offset,
                           const std::string& what) {
  std::ostringstream msg;
  msg << path << ": " << what << " (byte offset " << offset << ")";
  throw IoError(msg.str());
}

// Tracks position so errors can report byte offsets.
struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  bool eof() const { return pos >= buf.size(); }
  int peek() const { return eof() ? -1 : static_cast<unsigned char>(buf[pos]); }
  int get() { return eof() ? -1 : static_cast<unsigned char>(buf[pos++]); }

  // Whitespace and '#' comments (to end of line) separate header tokens.
  void skip_separators() {
    while (!eof()) {
      const int c = peek();
      if (c == '#') {
        while (!eof() && get() != '\n') {
        }
      } else if (std::isspace(c)) {
        ++pos;
      } else {
        break;
      }
    }
  }

  unsigned header_uint(const std::string& path, const char* what) {
    skip_separators();
    const std::size_t start = pos;
    unsigned long v = 0;
    bool any = false;
    while (!eof() && std::isdigit(peek())) {
      v = v * 10 + static_cast<unsigned long>(get() - '0');
      any = true;
      if (v > 1000000000UL) pnm_fail(path, start, "header value out of range");
    }
    if (!any) {
      pnm_fail(path, pos, std::string("expected ") + what);
    }
    return static_cast<unsigned>(v);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

ImageGrid load_pnm(const std::string& path) {
  const std::string buf = slurp(path);
  ByteReader r{buf};

  if (buf.size() < 2 || buf[0] != 'P') pnm_fail(path, 0, "not a PNM file");
  const char kind = buf[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    pnm_fail(path, 1, "unsupported PNM type (want P2/P3/P5/P6)");
  }
  r.pos = 2;
  const bool color = (kind == '3' || kind == '6');
  const bool binary = (kind == '5' || kind == '6');

  const unsigned width = r.header_uint(path, "width");
  const unsigned height = r.header_uint(path, "height");
  if (width == 0 || height == 0) pnm_fail(path, r.pos, "zero image dimension");
  const std::size_t maxval_at = r.pos;
  const unsigned maxval = r.header_uint(path, "maxval");
  if (maxval != 255) pnm_fail(path, maxval_at, "unsupported maxval (want 255)");

  const std::size_t count =
      static_cast<std::size_t>(width) * height * (color ? 3 : 1);
  std::vector<double> raw(count);

  if (binary) {
    // Exactly one whitespace byte separates the header from the payload.
    const int sep = r.get();
    if (sep < 0 || !std::isspace(sep)) {
      pnm_fail(path, r.pos, "missing separator before binary payload");
    }
    const std::size_t have = buf.size() - r.pos;
    if (have < count) {
      std::ostringstream what;
      what << "truncated payload: expected " << count << " bytes, found "
           << have;
      pnm_fail(path, r.pos, what.str());
    }
    for (std::size_t i = 0; i < count; ++i) {
      raw[i] = static_cast<unsigned char>(buf[r.pos + i]) / 255.0;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      r.skip_separators();
      if (r.eof()) {
        std::ostringstream what;
        what << "truncated payload: expected " << count << " samples, found "
             << i;
        pnm_fail(path, r.pos, what.str());
      }
      const std::size_t at = r.pos;
      const unsigned v = r.header_uint(path, "sample");
      if (v > maxval) pnm_fail(path, at, "sample exceeds maxval");
      raw[i] = v / 255.0;
    }
  }

  ImageGrid img;
  img.height = height;
  img.width = width;
  img.pix.resize(static_cast<std::size_t>(width) * height);
  if (color) {
    for (std::size_t i = 0; i < img.pix.size(); ++i) {
      img.pix[i] =
          0.299 * raw[3 * i] + 0.587 * raw[3 * i + 1] + 0.114 * raw[3 * i + 2];
    }
  } else {
    img.pix = std::move(raw);
  }
  return img;
}

void write_pgm(const std::string& path, const ImageGrid& img) {
  if (img.pix.size() != img.height * img.width) {
    throw std::invalid_argument("write_pgm: inconsistent dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.pix) {
    const double clamped = std::min(1.0, std::max(0.0, v));
    out.put(static_cast<char>(std::lround(clamped * 255.0)));
  }
  if (!out) throw IoError(path + ": write failed");
}

Vec sample_patch(const ImageGrid& img, const PatchSpec& spec, Rng& rng) {
  if (spec.height == 0 || spec.width == 0) {
    throw std::invalid_argument("sample_patch: empty patch");
  }
  if (img.height < spec.height || img.width < spec.width) {
    throw std::invalid_argument("sample_patch: image smaller than patch");
  }
  const std::size_t r0 = rng.uniform_below(img.height - spec.height + 1);
  const std::size_t c0 = rng.uniform_below(img.width - spec.width + 1);
  Vec out(spec.height * spec.width);
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      out[r * spec.width + c] = img.at(r0 + r, c0 + c);
    }
  }
  return out;
}

ImageGrid synth_image(const SyntheticImageSpec& spec, Rng& rng) {
  if (spec.size == 0) throw std::invalid_argument("synth_image: zero size");
  const std::size_t n = spec.size;
  ImageGrid img;
  img.height = img.width = n;
  img.pix.assign(n * n, 0.5);
  const double denom = static_cast<double>(n - 1 ? n - 1 : 1);

  for (std::size_t k = 0; k < spec.gradients; ++k) {
    const double gx = rng.uniform(-1.0, 1.0);
    const double gy = rng.uniform(-1.0, 1.0);
    const double amp = rng.uniform(-spec.amplitude, spec.amplitude);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        img.at(r, c) += amp * (gx * (c / denom - 0.5) + gy * (r / denom - 0.5));
      }
    }
  }
  for (std::size_t k = 0; k < spec.rectangles; ++k) {
    const std::size_t r0 = rng.uniform_below(n);
    const std::size_t c0 = rng.uniform_below(n);
    const std::size_t h = 1 + rng.uniform_below(n / 2 ? n / 2 : 1);
    const std::size_t w = 1 + rng.uniform_below(n / 2 ? n / 2 : 1);
    const double amp = rng.uniform(-spec.amplitude, spec.amplitude);
    for (std::size_t r = r0; r < std::min(n, r0 + h); ++r) {
      for (std::size_t c = c0; c < std::min(n, c0 + w); ++c) {
        img.at(r, c) += amp;
      }
    }
  }
  for (std::size_t k = 0; k < spec.disks; ++k) {
    const double cr = rng.uniform(0.0, static_cast<double>(n));
    const double cc = rng.uniform(0.0, static_cast<double>(n));
    const double rad = rng.uniform(2.0, static_cast<double>(n) / 3.0);
    const double amp = rng.uniform(-spec.amplitude, spec.amplitude);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        // cosine-tapered rim keeps the disk piecewise smooth
        const double d = std::sqrt(d2) / rad;
        if (d < 1.0) img.at(r, c) += amp * 0.5 * (1.0 + std::cos(d * 3.14159265358979323846));
      }
    }
  }
  for (double& v : img.pix) v = std::min(1.0, std::max(0.0, v));
  return img;
}

void write_raw_tensor(std::ostream& out, const Tensor& t) {
  const char magic[4] = {'A', 'E', 'L', 'P'};
  out.write(magic, 4);
  const std::uint32_t version = 1;
  const std::uint32_t rank = t.cols == 1 ? 1 : 2;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&rank), 4);
  const std::uint64_t dims[2] = {t.rows, t.cols};
  out.write(reinterpret_cast<const char*>(dims), 8 * rank);
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(8 * t.data.size()));
  if (!out) throw IoError("raw tensor: write failed");
}

Tensor read_raw_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AELP", 4) != 0) {
    throw IoError("raw tensor: bad magic");
  }
  std::uint32_t version = 0, rank = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (!in || version != 1) throw IoError("raw tensor: unsupported version");
  if (rank == 0 || rank > 2) throw IoError("raw tensor: unsupported rank");
  std::uint64_t dims[2] = {0, 1};
  in.read(reinterpret_cast<char*>(dims), 8 * rank);
  if (!in) throw IoError("raw tensor: truncated header");
  if (dims[0] == 0 || dims[1] == 0 || dims[0] * dims[1] > (1ULL << 32)) {
    throw IoError("raw tensor: implausible dimensions");
  }
  Tensor t = Tensor::matrix(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(8 * t.data.size()));
  if (!in) throw IoError("raw tensor: truncated payload");
  return t;
}

}  // namespace aelpn
