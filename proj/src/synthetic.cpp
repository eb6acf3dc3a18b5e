#include "mmdpcn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mmdpcn/errors.hpp"

namespace mmdpcn {

SparseGenerativeData make_sparse_generative(const SparseGenerativeSpec& spec) {
  require(spec.p > 0 && spec.k > 0 && spec.count > 0, ErrorKind::InvalidArgument, "sparse data: empty shape");
  require(spec.density > 0.0 && spec.density <= 1.0, ErrorKind::InvalidArgument, "sparse data: density in (0, 1]");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> amp(spec.amp_lo, spec.amp_hi);
  std::bernoulli_distribution active(spec.density);
  std::bernoulli_distribution coin(0.5);

  SparseGenerativeData out;
  out.c = Matrix(spec.p, spec.k);
  for (double& v : std::span<double>(out.c.data(), spec.p * spec.k)) v = normal(rng);
  out.c = column_normalize(out.c);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Vector x(spec.k);
    for (std::size_t j = 0; j < spec.k; ++j)
      if (active(rng)) x[j] = coin(rng) ? amp(rng) : -amp(rng);
    Vector y = matvec(out.c, x);
    for (double& v : y) v += spec.noise * normal(rng);
    out.patches.push_back(std::move(y));
    out.codes.push_back(std::move(x));
  }
  return out;
}

namespace {

bool inside(Shape shape, std::size_t r, std::size_t c, std::size_t s) {
  const double centre = (static_cast<double>(s) - 1.0) / 2.0;
  const double y = static_cast<double>(r);
  const double x = static_cast<double>(c);
  switch (shape) {
    case Shape::Diamond: return std::abs(y - centre) + std::abs(x - centre) <= centre;
    case Shape::Triangle: return std::abs(x - centre) <= y / 2.0;
    case Shape::Square: return true;
  }
  return false;
}

}  // namespace

ShapesDataset make_shapes(const ShapesSpec& spec) {
  require(spec.size >= 16, ErrorKind::InvalidArgument, "shapes: frame size must be at least 16");
  require(spec.grid >= 1 && spec.size % spec.grid == 0, ErrorKind::GridMismatch, "shapes: size not divisible by grid");
  const std::size_t cell = spec.size / spec.grid;
  require(cell > spec.max_shift + 2, ErrorKind::InvalidArgument, "shapes: cell too small for the drift range");
  require(spec.hold >= 1, ErrorKind::InvalidArgument, "shapes: hold must be positive");
  const std::size_t side = cell - spec.max_shift;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_cell(0, spec.grid - 1);
  std::uniform_int_distribution<long> pick_offset(0, static_cast<long>(spec.max_shift));
  std::bernoulli_distribution coin(0.5);
  const long margin = static_cast<long>(spec.max_shift);

  ShapesDataset out;
  for (int kind = 0; kind < 3; ++kind) {
    const std::size_t cr = pick_cell(rng);
    const std::size_t cc = pick_cell(rng);
    long py = pick_offset(rng);
    long px = pick_offset(rng);
    long vy = coin(rng) ? 1 : -1;
    long vx = coin(rng) ? 1 : -1;
    for (std::size_t f = 0; f < spec.frames_per_shape; ++f) {
      Frame frame{spec.size, spec.size, 1, std::vector<double>(spec.size * spec.size, 0.0)};
      const std::size_t oy = cr * cell + static_cast<std::size_t>(py);
      const std::size_t ox = cc * cell + static_cast<std::size_t>(px);
      for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c)
          if (inside(static_cast<Shape>(kind), r, c, side)) frame.pixels[(oy + r) * spec.size + ox + c] = 1.0;
      for (double& v : frame.pixels) v = std::clamp(v + spec.noise * normal(rng), 0.0, 1.0);
      out.frames.push_back(std::move(frame));
      out.labels.push_back(kind);

      if (margin > 0 && f % spec.hold == 0) {
        py += vy;
        px += vx;
        if (py < 0 || py > margin) {
          vy = -vy;
          py += 2 * vy;
        }
        if (px < 0 || px > margin) {
          vx = -vx;
          px += 2 * vx;
        }
      }
    }
  }
  return out;
}

}  // namespace mmdpcn
