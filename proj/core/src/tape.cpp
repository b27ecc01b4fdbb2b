#include "nextmp/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nextmp {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<int> drop_last(const std::vector<int>& s) {
  return std::vector<int>(s.begin(), s.end() - 1);
}

std::size_t leading_numel(const std::vector<int>& s) {
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    n *= static_cast<std::size_t>(s[i]);
  return n;
}

}  // namespace

Tape::NodeId Tape::push(Tensor value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  if (record_) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::leaf(Tensor value) { return push(std::move(value), {}); }

void Tape::backward(NodeId root) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  check(nodes_[root].value.numel() == 1, "backward: root must be scalar");
  for (NodeId i = 0; i <= root; ++i)
    nodes_[i].grad = Tensor::zeros(nodes_[i].value.shape);
  nodes_[root].grad[0] = 1.0;
  for (NodeId i = root; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

Tape::NodeId Tape::dense(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  check(wv.shape.size() == 2, "dense: w must be [out, in]");
  const int out = wv.shape[0], in = wv.shape[1];
  check(static_cast<int>(xv.numel()) == in, "dense: x/in mismatch");
  check(static_cast<int>(bv.numel()) == out, "dense: b/out mismatch");

  Tensor y = Tensor::zeros({out});
  for (int o = 0; o < out; ++o) {
    double acc = bv[o];
    for (int i = 0; i < in; ++i) acc += wv[o * in + i] * xv[i];
    y[o] = acc;
  }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, w, b, id, out, in](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& xv2 = t.value(x);
      const Tensor& wv2 = t.value(w);
      Tensor& gx = t.grad_ref(x);
      Tensor& gw = t.grad_ref(w);
      Tensor& gb = t.grad_ref(b);
      for (int o = 0; o < out; ++o) {
        gb[o] += g[o];
        for (int i = 0; i < in; ++i) {
          gw[o * in + i] += g[o] * xv2[i];
          gx[i] += g[o] * wv2[o * in + i];
        }
      }
    };
  return id;
}

Tape::NodeId Tape::linear_lastdim(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  check(wv.shape.size() == 2, "linear_lastdim: w must be [c_in, c_out]");
  const int cin = wv.shape[0], cout = wv.shape[1];
  check(xv.last_dim() == cin, "linear_lastdim: channel mismatch");
  const std::size_t locs = leading_numel(xv.shape);

  std::vector<int> out_shape = xv.shape;
  out_shape.back() = cout;
  Tensor y = Tensor::zeros(out_shape);
  const bool with_bias = b >= 0;
  const Tensor* bv = with_bias ? &value(b) : nullptr;
  for (std::size_t l = 0; l < locs; ++l) {
    const double* xi = xv.data.data() + l * cin;
    double* yo = y.data.data() + l * cout;
    for (int o = 0; o < cout; ++o) yo[o] = with_bias ? (*bv)[o] : 0.0;
    for (int i = 0; i < cin; ++i) {
      const double xvi = xi[i];
      const double* wrow = wv.data.data() + static_cast<std::size_t>(i) * cout;
      for (int o = 0; o < cout; ++o) yo[o] += xvi * wrow[o];
    }
  }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, w, b, id, cin, cout, locs, with_bias](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& xv2 = t.value(x);
      const Tensor& wv2 = t.value(w);
      Tensor& gx = t.grad_ref(x);
      Tensor& gw = t.grad_ref(w);
      for (std::size_t l = 0; l < locs; ++l) {
        const double* xi = xv2.data.data() + l * cin;
        const double* go = g.data.data() + l * cout;
        double* gxi = gx.data.data() + l * cin;
        for (int i = 0; i < cin; ++i) {
          const double* wrow =
              wv2.data.data() + static_cast<std::size_t>(i) * cout;
          double* gwrow = gw.data.data() + static_cast<std::size_t>(i) * cout;
          double acc = 0.0;
          for (int o = 0; o < cout; ++o) {
            acc += go[o] * wrow[o];
            gwrow[o] += go[o] * xi[i];
          }
          gxi[i] += acc;
        }
      }
      if (with_bias) {
        Tensor& gb = t.grad_ref(b);
        for (std::size_t l = 0; l < locs; ++l) {
          const double* go = g.data.data() + l * cout;
          for (int o = 0; o < cout; ++o) gb[o] += go[o];
        }
      }
    };
  return id;
}

Tape::NodeId Tape::conv2d(NodeId x, NodeId k, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& kv = value(k);
  const Tensor& bv = value(b);
  check(xv.shape.size() == 3, "conv2d: x must be [h, w, c_in]");
  check(kv.shape.size() == 4, "conv2d: k must be [kh, kw, c_in, c_out]");
  const int H = xv.shape[0], W = xv.shape[1], cin = xv.shape[2];
  const int kh = kv.shape[0], kw = kv.shape[1], cout = kv.shape[3];
  check(kv.shape[2] == cin, "conv2d: channel mismatch");
  check(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd");
  const int ph = kh / 2, pw = kw / 2;

  Tensor y = Tensor::zeros({H, W, cout});
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      double* yo = y.data.data() + (static_cast<std::size_t>(r) * W + c) * cout;
      for (int o = 0; o < cout; ++o) yo[o] = bv[o];
      for (int dr = 0; dr < kh; ++dr) {
        const int rr = r + dr - ph;
        if (rr < 0 || rr >= H) continue;
        for (int dc = 0; dc < kw; ++dc) {
          const int cc = c + dc - pw;
          if (cc < 0 || cc >= W) continue;
          const double* xi =
              xv.data.data() + (static_cast<std::size_t>(rr) * W + cc) * cin;
          const double* kk =
              kv.data.data() +
              ((static_cast<std::size_t>(dr) * kw + dc) * cin) * cout;
          for (int i = 0; i < cin; ++i)
            for (int o = 0; o < cout; ++o)
              yo[o] += xi[i] * kk[static_cast<std::size_t>(i) * cout + o];
        }
      }
    }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [=](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& xv2 = t.value(x);
      const Tensor& kv2 = t.value(k);
      Tensor& gx = t.grad_ref(x);
      Tensor& gk = t.grad_ref(k);
      Tensor& gb = t.grad_ref(b);
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          const double* go =
              g.data.data() + (static_cast<std::size_t>(r) * W + c) * cout;
          for (int o = 0; o < cout; ++o) gb[o] += go[o];
          for (int dr = 0; dr < kh; ++dr) {
            const int rr = r + dr - ph;
            if (rr < 0 || rr >= H) continue;
            for (int dc = 0; dc < kw; ++dc) {
              const int cc = c + dc - pw;
              if (cc < 0 || cc >= W) continue;
              const std::size_t xoff =
                  (static_cast<std::size_t>(rr) * W + cc) * cin;
              const std::size_t koff =
                  (static_cast<std::size_t>(dr) * kw + dc) * cin * cout;
              for (int i = 0; i < cin; ++i)
                for (int o = 0; o < cout; ++o) {
                  gk[koff + static_cast<std::size_t>(i) * cout + o] +=
                      go[o] * xv2[xoff + i];
                  gx[xoff + i] +=
                      go[o] * kv2[koff + static_cast<std::size_t>(i) * cout + o];
                }
            }
          }
        }
    };
  return id;
}

Tape::NodeId Tape::conv3d(NodeId x, NodeId k, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& kv = value(k);
  const Tensor& bv = value(b);
  check(xv.shape.size() == 4, "conv3d: x must be [a, b, c, c_in]");
  check(kv.shape.size() == 5, "conv3d: k must be [ka, kb, kc, c_in, c_out]");
  const int A = xv.shape[0], B = xv.shape[1], C = xv.shape[2],
            cin = xv.shape[3];
  const int ka = kv.shape[0], kb = kv.shape[1], kc = kv.shape[2],
            cout = kv.shape[4];
  check(kv.shape[3] == cin, "conv3d: channel mismatch");
  check(ka % 2 == 1 && kb % 2 == 1 && kc % 2 == 1,
        "conv3d: kernel dims must be odd");
  const int pa = ka / 2, pb = kb / 2, pc = kc / 2;

  auto xoff = [&](int a, int b2, int c) {
    return ((static_cast<std::size_t>(a) * B + b2) * C + c) * cin;
  };
  auto yoff = [&](int a, int b2, int c) {
    return ((static_cast<std::size_t>(a) * B + b2) * C + c) * cout;
  };
  auto koff = [&](int da, int db, int dc) {
    return ((static_cast<std::size_t>(da) * kb + db) * kc + dc) * cin * cout;
  };

  Tensor y = Tensor::zeros({A, B, C, cout});
  for (int a = 0; a < A; ++a)
    for (int b2 = 0; b2 < B; ++b2)
      for (int c = 0; c < C; ++c) {
        double* yo = y.data.data() + yoff(a, b2, c);
        for (int o = 0; o < cout; ++o) yo[o] = bv[o];
        for (int da = 0; da < ka; ++da) {
          const int aa = a + da - pa;
          if (aa < 0 || aa >= A) continue;
          for (int db = 0; db < kb; ++db) {
            const int bb = b2 + db - pb;
            if (bb < 0 || bb >= B) continue;
            for (int dc = 0; dc < kc; ++dc) {
              const int cc = c + dc - pc;
              if (cc < 0 || cc >= C) continue;
              const double* xi = xv.data.data() + xoff(aa, bb, cc);
              const double* kk = kv.data.data() + koff(da, db, dc);
              for (int i = 0; i < cin; ++i) {
                const double xvi = xi[i];
                const double* krow = kk + static_cast<std::size_t>(i) * cout;
                for (int o = 0; o < cout; ++o) yo[o] += xvi * krow[o];
              }
            }
          }
        }
      }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [=](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& xv2 = t.value(x);
      const Tensor& kv2 = t.value(k);
      Tensor& gx = t.grad_ref(x);
      Tensor& gk = t.grad_ref(k);
      Tensor& gb = t.grad_ref(b);
      for (int a = 0; a < A; ++a)
        for (int b2 = 0; b2 < B; ++b2)
          for (int c = 0; c < C; ++c) {
            const double* go = g.data.data() + yoff(a, b2, c);
            for (int o = 0; o < cout; ++o) gb[o] += go[o];
            for (int da = 0; da < ka; ++da) {
              const int aa = a + da - pa;
              if (aa < 0 || aa >= A) continue;
              for (int db = 0; db < kb; ++db) {
                const int bb = b2 + db - pb;
                if (bb < 0 || bb >= B) continue;
                for (int dc = 0; dc < kc; ++dc) {
                  const int cc = c + dc - pc;
                  if (cc < 0 || cc >= C) continue;
                  const std::size_t xo = xoff(aa, bb, cc);
                  const std::size_t ko = koff(da, db, dc);
                  for (int i = 0; i < cin; ++i) {
                    const double xvi = xv2[xo + i];
                    const double* krow =
                        kv2.data.data() + ko + static_cast<std::size_t>(i) * cout;
                    double* gkrow =
                        gk.data.data() + ko + static_cast<std::size_t>(i) * cout;
                    double acc = 0.0;
                    for (int o = 0; o < cout; ++o) {
                      acc += go[o] * krow[o];
                      gkrow[o] += go[o] * xvi;
                    }
                    gx[xo + i] += acc;
                  }
                }
              }
            }
          }
    };
  return id;
}

Tape::NodeId Tape::relu(NodeId x) {
  const Tensor& xv = value(x);
  Tensor y = xv;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& xv2 = t.value(x);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.numel(); ++i)
        if (xv2[i] > 0.0) gx[i] += g[i];
    };
  return id;
}

Tape::NodeId Tape::sigmoid(NodeId x) {
  const Tensor& xv = value(x);
  Tensor y = xv;
  for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& yv = t.value(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
    };
  return id;
}

Tape::NodeId Tape::tanh_op(NodeId x) {
  const Tensor& xv = value(x);
  Tensor y = xv;
  for (auto& v : y.data) v = std::tanh(v);
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& yv = t.value(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.numel(); ++i)
        gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
    };
  return id;
}

Tape::NodeId Tape::softmax_all(NodeId x) {
  const Tensor& xv = value(x);
  Tensor y = xv;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : xv.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (auto& v : y.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : y.data) v /= sum;
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& yv = t.value(id);
      Tensor& gx = t.grad_ref(x);
      double dot = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) dot += g[i] * yv[i];
      for (std::size_t i = 0; i < g.numel(); ++i)
        gx[i] += yv[i] * (g[i] - dot);
    };
  return id;
}

Tape::NodeId Tape::group_min_lastdim(NodeId x, int group_size) {
  const Tensor& xv = value(x);
  const int c = xv.last_dim();
  check(group_size >= 1 && c % group_size == 0,
        "group_min_lastdim: channels not divisible by group size");
  const int groups = c / group_size;
  const std::size_t locs = leading_numel(xv.shape);

  std::vector<int> out_shape = xv.shape;
  out_shape.back() = groups;
  Tensor y = Tensor::zeros(out_shape);
  auto argmins = std::make_shared<std::vector<int>>(locs * groups);
  for (std::size_t l = 0; l < locs; ++l) {
    const double* xi = xv.data.data() + l * c;
    for (int gidx = 0; gidx < groups; ++gidx) {
      int best = gidx * group_size;
      for (int m = 1; m < group_size; ++m) {
        const int cand = gidx * group_size + m;
        if (xi[cand] < xi[best]) best = cand;
      }
      y.data[l * groups + gidx] = xi[best];
      (*argmins)[l * groups + gidx] = best;
    }
  }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id, groups, c, locs, argmins](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t l = 0; l < locs; ++l)
        for (int gidx = 0; gidx < groups; ++gidx)
          gx[l * c + (*argmins)[l * groups + gidx]] += g[l * groups + gidx];
    };
  return id;
}

Tape::NodeId Tape::concat_lastdim(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(drop_last(av.shape) == drop_last(bv.shape),
        "concat_lastdim: leading shape mismatch");
  const int ca = av.last_dim(), cb = bv.last_dim();
  const std::size_t locs = leading_numel(av.shape);

  std::vector<int> out_shape = av.shape;
  out_shape.back() = ca + cb;
  Tensor y = Tensor::zeros(out_shape);
  for (std::size_t l = 0; l < locs; ++l) {
    std::copy_n(av.data.data() + l * ca, ca, y.data.data() + l * (ca + cb));
    std::copy_n(bv.data.data() + l * cb, cb,
                y.data.data() + l * (ca + cb) + ca);
  }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [a, b, id, ca, cb, locs](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t l = 0; l < locs; ++l) {
        for (int i = 0; i < ca; ++i) ga[l * ca + i] += g[l * (ca + cb) + i];
        for (int i = 0; i < cb; ++i)
          gb[l * cb + i] += g[l * (ca + cb) + ca + i];
      }
    };
  return id;
}

Tape::NodeId Tape::slice_lastdim(NodeId x, int from, int to) {
  const Tensor& xv = value(x);
  const int c = xv.last_dim();
  check(0 <= from && from < to && to <= c, "slice_lastdim: bad range");
  const int w = to - from;
  const std::size_t locs = leading_numel(xv.shape);

  std::vector<int> out_shape = xv.shape;
  out_shape.back() = w;
  Tensor y = Tensor::zeros(out_shape);
  for (std::size_t l = 0; l < locs; ++l)
    std::copy_n(xv.data.data() + l * c + from, w, y.data.data() + l * w);
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id, c, from, w, locs](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t l = 0; l < locs; ++l)
        for (int i = 0; i < w; ++i) gx[l * c + from + i] += g[l * w + i];
    };
  return id;
}

Tape::NodeId Tape::broadcast_lastdim(NodeId x, int copies) {
  const Tensor& xv = value(x);
  check(xv.last_dim() == 1, "broadcast_lastdim: last dim must be 1");
  const std::size_t locs = leading_numel(xv.shape);

  std::vector<int> out_shape = xv.shape;
  out_shape.back() = copies;
  Tensor y = Tensor::zeros(out_shape);
  for (std::size_t l = 0; l < locs; ++l)
    for (int i = 0; i < copies; ++i) y.data[l * copies + i] = xv[l];
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id, copies, locs](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t l = 0; l < locs; ++l)
        for (int i = 0; i < copies; ++i) gx[l] += g[l * copies + i];
    };
  return id;
}

Tape::NodeId Tape::tile_leading(NodeId x, const std::vector<int>& lead) {
  const Tensor& xv = value(x);
  std::size_t copies = 1;
  for (int d : lead) copies *= static_cast<std::size_t>(d);
  std::vector<int> out_shape = lead;
  out_shape.insert(out_shape.end(), xv.shape.begin(), xv.shape.end());

  const std::size_t n = xv.numel();
  Tensor y = Tensor::zeros(out_shape);
  for (std::size_t c = 0; c < copies; ++c)
    std::copy_n(xv.data.data(), n, y.data.data() + c * n);
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id, copies, n](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t c = 0; c < copies; ++c)
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[c * n + i];
    };
  return id;
}

Tape::NodeId Tape::reshape(NodeId x, std::vector<int> shape) {
  const Tensor& xv = value(x);
  check(shape_numel(shape) == xv.numel(), "reshape: numel mismatch");
  Tensor y(std::move(shape), xv.data);
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    };
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "add: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += bv[i];
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
    };
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "sub: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= bv[i];
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i];
        gb[i] -= g[i];
      }
    };
  return id;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "mul: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= bv[i];
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& av2 = t.value(a);
      const Tensor& bv2 = t.value(b);
      Tensor& ga = t.grad_ref(a);
      Tensor& gb = t.grad_ref(b);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        ga[i] += g[i] * bv2[i];
        gb[i] += g[i] * av2[i];
      }
    };
  return id;
}

Tape::NodeId Tape::scale(NodeId x, double c) {
  Tensor y = value(x);
  for (auto& v : y.data) v *= c;
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [x, id, c](Tape& t) {
      const Tensor& g = t.grad(id);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += c * g[i];
    };
  return id;
}

Tape::NodeId Tape::attention_pool(NodeId nu, NodeId mu) {
  const Tensor& nv = value(nu);
  const Tensor& mv = value(mu);
  check(nv.shape.size() == 4, "attention_pool: nu must be rank 4");
  check(drop_last(nv.shape) == mv.shape,
        "attention_pool: mu shape must match nu cells");
  const int p = nv.last_dim();
  const std::size_t cells = mv.numel();

  Tensor y = Tensor::zeros({p});
  for (std::size_t l = 0; l < cells; ++l) {
    const double m = mv[l];
    const double* nrow = nv.data.data() + l * p;
    for (int k = 0; k < p; ++k) y[k] += m * nrow[k];
  }
  const NodeId id = push(std::move(y), {});
  if (record_)
    nodes_[id].back = [nu, mu, id, p, cells](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& nv2 = t.value(nu);
      const Tensor& mv2 = t.value(mu);
      Tensor& gn = t.grad_ref(nu);
      Tensor& gm = t.grad_ref(mu);
      for (std::size_t l = 0; l < cells; ++l) {
        const double m = mv2[l];
        const double* nrow = nv2.data.data() + l * p;
        double* gnrow = gn.data.data() + l * p;
        double acc = 0.0;
        for (int k = 0; k < p; ++k) {
          gnrow[k] += g[k] * m;
          acc += g[k] * nrow[k];
        }
        gm[l] += acc;
      }
    };
  return id;
}

Tape::NodeId Tape::sum_squares(NodeId x) {
  const Tensor& xv = value(x);
  double acc = 0.0;
  for (double v : xv.data) acc += v * v;
  const NodeId id = push(Tensor::from({1}, {acc}), {});
  if (record_)
    nodes_[id].back = [x, id](Tape& t) {
      const double g = t.grad(id)[0];
      const Tensor& xv2 = t.value(x);
      Tensor& gx = t.grad_ref(x);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += 2.0 * g * xv2[i];
    };
  return id;
}

}  // namespace nextmp
