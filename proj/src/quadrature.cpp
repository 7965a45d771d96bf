#include "drift/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace drift::quad {

namespace {

// QUADPACK qk15 abscissae (descending, last is the centre) and weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
constexpr std::size_t kNodes = 15;

struct Panel {
  double a, b;
  Vec kronrod;
  double err;
};

// Node j of a panel: 0..6 left of centre, 7 centre, 8..14 right.
double node(double a, double b, std::size_t j) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  if (j < 7) return c - h * kXgk[j];
  if (j == 7) return c;
  return c + h * kXgk[14 - j];
}

void evaluate_panels(const BatchIntegrand& f, std::size_t dim, std::vector<Panel>& panels,
                     std::size_t first, Vec& nodes, Vec& vals, int& evals) {
  const std::size_t count = panels.size() - first;
  if (count == 0) return;
  const std::size_t N = count * kNodes;
  nodes.resize(N);
  vals.assign(N * dim, 0.0);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t j = 0; j < kNodes; ++j) {
      nodes[p * kNodes + j] = node(panels[first + p].a, panels[first + p].b, j);
    }
  }
  f(std::span<const double>(nodes.data(), N), std::span<double>(vals.data(), vals.size()));
  evals += int(N);
  for (std::size_t p = 0; p < count; ++p) {
    Panel& pan = panels[first + p];
    const double h = 0.5 * (pan.b - pan.a);
    pan.kronrod.assign(dim, 0.0);
    pan.err = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double* v = &vals[c * N + p * kNodes];
      double k = kWgk[7] * v[7];
      double g = kWg[3] * v[7];
      for (std::size_t j = 0; j < 7; ++j) {
        const double pair = v[j] + v[14 - j];
        k += kWgk[j] * pair;
        if (j % 2 == 1) g += kWg[j / 2] * pair;
      }
      pan.kronrod[c] = h * k;
      pan.err = std::max(pan.err, std::abs(h * (k - g)));
    }
  }
}

}  // namespace

Result gauss_kronrod(const BatchIntegrand& f, std::size_t dim, double a, double b,
                     const Options& opt) {
  Result res;
  res.value.assign(dim, 0.0);
  if (a == b) {
    res.converged = true;
    return res;
  }
  std::vector<Panel> panels;
  const int init = std::max(1, opt.initial_panels);
  for (int i = 0; i < init; ++i) {
    panels.push_back({a + (b - a) * i / init, a + (b - a) * (i + 1) / init, {}, 0.0});
  }
  Vec nodes, vals;
  evaluate_panels(f, dim, panels, 0, nodes, vals, res.evaluations);

  const double length = std::abs(b - a);
  for (;;) {
    double total = 0.0;
    for (const auto& p : panels) total += p.err;
    if (total <= opt.abs_tol) {
      res.converged = true;
      break;
    }
    if (int(panels.size()) >= opt.max_panels) break;
    std::size_t budget = std::size_t(opt.max_panels) - panels.size();
    std::vector<Panel> next, to_split;
    next.reserve(panels.size() * 2);
    for (auto& p : panels) {
      const double share = opt.abs_tol * std::abs(p.b - p.a) / length;
      if (p.err > share && to_split.size() < budget) {
        to_split.push_back(std::move(p));
      } else {
        next.push_back(std::move(p));
      }
    }
    if (to_split.empty()) {
      // Every panel meets its share but the sum does not; split the worst one.
      auto worst = std::max_element(next.begin(), next.end(),
                                    [](const Panel& x, const Panel& y) { return x.err < y.err; });
      to_split.push_back(std::move(*worst));
      next.erase(worst);
    }
    const std::size_t keep = next.size();
    for (const auto& p : to_split) {
      const double m = 0.5 * (p.a + p.b);
      next.push_back({p.a, m, {}, 0.0});
      next.push_back({m, p.b, {}, 0.0});
    }
    panels = std::move(next);
    evaluate_panels(f, dim, panels, keep, nodes, vals, res.evaluations);
  }
  res.error = 0.0;
  for (const auto& p : panels) {
    res.error += p.err;
    for (std::size_t c = 0; c < dim; ++c) res.value[c] += p.kronrod[c];
  }
  res.panels = int(panels.size());
  return res;
}

}  // namespace drift::quad
