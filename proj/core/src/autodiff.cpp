#include "addm/autodiff.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "addm/error.hpp"

namespace addm {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// softplus(u) = log(1 + e^u), overflow-safe for |u| up to any float.
double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::fabs(u))); }

int64_t conv_out_dim(int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Scatter x(b) into a (Cin*K*K) x (Ho*Wo) patch matrix.
void im2col(const Tensor& x, int64_t b, int k, int stride, int pad, RowMat& col) {
  const int64_t cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t ho = conv_out_dim(h, k, stride, pad);
  const int64_t wo = conv_out_dim(w, k, stride, pad);
  col.setZero(cin * k * k, ho * wo);
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int64_t row = (ci * k + ky) * k + kx;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            col(row, oy * wo + ox) = x.at(b, ci, iy, ix);
          }
        }
      }
    }
  }
}

// Transpose of im2col: accumulate patch-matrix gradients back into dx(b).
void col2im_accum(const RowMat& dcol, int64_t b, int k, int stride, int pad, Tensor& dx) {
  const int64_t cin = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
  const int64_t ho = conv_out_dim(h, k, stride, pad);
  const int64_t wo = conv_out_dim(w, k, stride, pad);
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int64_t row = (ci * k + ky) * k + kx;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            dx.at(b, ci, iy, ix) += dcol(row, oy * wo + ox);
          }
        }
      }
    }
  }
}

}  // namespace

NodeId Tape::push(Tensor value, std::function<void()> backfn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backfn)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

const Tensor& Tape::value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

Tensor& Tape::grad_buffer(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) { return grad_buffer(id); }

void Tape::backward(NodeId loss) {
  const Tensor& lv = value(loss);
  if (lv.numel() != 1) throw ValidationError("backward: loss must be a scalar node");
  grad_buffer(loss)[0] = 1.0f;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.backfn && !n.grad.empty()) n.backfn();
  }
}

NodeId Tape::conv2d(NodeId xid, NodeId wid, NodeId bid, int stride, int pad) {
  const Tensor& x = val(xid);
  const Tensor& w = val(wid);
  const Tensor& b = val(bid);
  require_rank4(x, "conv2d input");
  require_rank4(w, "conv2d weight");
  if (w.dim(2) != w.dim(3)) throw ValidationError("conv2d: kernel must be square");
  if (x.dim(1) != w.dim(1)) throw ValidationError("conv2d: channel mismatch");
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw ValidationError("conv2d: bad bias shape");

  const int64_t bs = x.dim(0), cout = w.dim(0), cin = w.dim(1);
  const int k = static_cast<int>(w.dim(2));
  const int64_t ho = conv_out_dim(x.dim(2), k, stride, pad);
  const int64_t wo = conv_out_dim(x.dim(3), k, stride, pad);
  if (ho < 1 || wo < 1) throw ValidationError("conv2d: output would be empty");

  Tensor out({bs, cout, ho, wo});
  {
    MapConstMat wm(w.data(), cout, cin * k * k);
    RowMat col;
    for (int64_t bi = 0; bi < bs; ++bi) {
      im2col(x, bi, k, stride, pad, col);
      MapMat om(out.data() + bi * cout * ho * wo, cout, ho * wo);
      om.noalias() = wm * col;
      for (int64_t c = 0; c < cout; ++c) om.row(c).array() += b[c];
    }
  }

  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, wid, bid, out_id, stride, pad, k, bs,
                                                cout, cin, ho, wo]() {
    const Tensor& g = grad_buffer(out_id);
    const Tensor& x = val(xid);
    const Tensor& w = val(wid);
    Tensor& dx = grad_buffer(xid);
    Tensor& dw = grad_buffer(wid);
    Tensor& db = grad_buffer(bid);

    MapConstMat wm(w.data(), cout, cin * k * k);
    MapMat dwm(dw.data(), cout, cin * k * k);
    RowMat col, dcol;
    for (int64_t bi = 0; bi < bs; ++bi) {
      MapConstMat gm(g.data() + bi * cout * ho * wo, cout, ho * wo);
      im2col(x, bi, k, stride, pad, col);  // recomputed; cheaper than caching
      dwm.noalias() += gm * col.transpose();
      dcol.noalias() = wm.transpose() * gm;
      col2im_accum(dcol, bi, k, stride, pad, dx);
      for (int64_t c = 0; c < cout; ++c) db[c] += gm.row(c).sum();
    }
  };
  return out_id;
}

NodeId Tape::linear(NodeId xid, NodeId wid, NodeId bid) {
  const Tensor& x = val(xid);
  const Tensor& w = val(wid);
  const Tensor& b = val(bid);
  if (x.rank() != 2 || w.rank() != 2) throw ValidationError("linear: expected rank-2 operands");
  if (x.dim(1) != w.dim(1)) throw ValidationError("linear: feature dim mismatch");
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw ValidationError("linear: bad bias shape");

  const int64_t bs = x.dim(0), f = x.dim(1), o = w.dim(0);
  Tensor out({bs, o});
  {
    MapConstMat xm(x.data(), bs, f);
    MapConstMat wm(w.data(), o, f);
    MapMat om(out.data(), bs, o);
    om.noalias() = xm * wm.transpose();
    for (int64_t r = 0; r < bs; ++r)
      for (int64_t c = 0; c < o; ++c) om(r, c) += b[c];
  }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, wid, bid, out_id, bs, f, o]() {
    const Tensor& g = grad_buffer(out_id);
    MapConstMat gm(g.data(), bs, o);
    MapConstMat xm(val(xid).data(), bs, f);
    MapConstMat wm(val(wid).data(), o, f);
    {
      Tensor& dx = grad_buffer(xid);
      MapMat dxm(dx.data(), bs, f);
      dxm.noalias() += gm * wm;
    }
    {
      Tensor& dw = grad_buffer(wid);
      MapMat dwm(dw.data(), o, f);
      dwm.noalias() += gm.transpose() * xm;
    }
    {
      Tensor& db = grad_buffer(bid);
      for (int64_t r = 0; r < bs; ++r)
        for (int64_t c = 0; c < o; ++c) db[c] += gm(r, c);
    }
  };
  return out_id;
}

NodeId Tape::group_norm(NodeId xid, NodeId gid, NodeId bid, int groups, float eps) {
  const Tensor& x = val(xid);
  require_rank4(x, "group_norm input");
  const int64_t bs = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (groups < 1 || c % groups != 0)
    throw ValidationError("group_norm: channels not divisible by groups");
  const Tensor& gamma = val(gid);
  const Tensor& beta = val(bid);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
    throw ValidationError("group_norm: scale/shift must have one entry per channel");

  const int64_t cpg = c / groups;
  const int64_t gsize = cpg * h * w;
  Tensor out(x.shape());
  // Saved statistics per (sample, group) for the backward pass.
  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(bs * groups));
  auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(bs * groups));

  for (int64_t bi = 0; bi < bs; ++bi) {
    for (int64_t g = 0; g < groups; ++g) {
      const float* xs = x.data() + (bi * c + g * cpg) * h * w;
      double sum = 0.0, sq = 0.0;
      for (int64_t i = 0; i < gsize; ++i) {
        sum += xs[i];
        sq += static_cast<double>(xs[i]) * xs[i];
      }
      double mu = sum / static_cast<double>(gsize);
      double var = sq / static_cast<double>(gsize) - mu * mu;
      double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
      (*mean)[static_cast<size_t>(bi * groups + g)] = mu;
      (*invstd)[static_cast<size_t>(bi * groups + g)] = is;
      float* os = out.data() + (bi * c + g * cpg) * h * w;
      for (int64_t cc = 0; cc < cpg; ++cc) {
        const float ga = gamma[g * cpg + cc];
        const float be = beta[g * cpg + cc];
        for (int64_t i = 0; i < h * w; ++i) {
          const int64_t idx = cc * h * w + i;
          os[idx] = static_cast<float>((xs[idx] - mu) * is) * ga + be;
        }
      }
    }
  }

  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, gid, bid, out_id, bs, c, h, w, groups,
                                                cpg, gsize, mean, invstd]() {
    const Tensor& gout = grad_buffer(out_id);
    const Tensor& x = val(xid);
    const Tensor& gamma = val(gid);
    Tensor& dx = grad_buffer(xid);
    Tensor& dgamma = grad_buffer(gid);
    Tensor& dbeta = grad_buffer(bid);

    for (int64_t bi = 0; bi < bs; ++bi) {
      for (int64_t g = 0; g < groups; ++g) {
        const int64_t base = (bi * c + g * cpg) * h * w;
        const float* xs = x.data() + base;
        const float* gs = gout.data() + base;
        const double mu = (*mean)[static_cast<size_t>(bi * groups + g)];
        const double is = (*invstd)[static_cast<size_t>(bi * groups + g)];
        // h_i = dy_i * gamma_c; dx = is*(h - mean(h) - xhat*mean(h*xhat))
        double hsum = 0.0, hxsum = 0.0;
        for (int64_t cc = 0; cc < cpg; ++cc) {
          const double ga = gamma[g * cpg + cc];
          for (int64_t i = 0; i < h * w; ++i) {
            const int64_t idx = cc * h * w + i;
            const double xhat = (xs[idx] - mu) * is;
            const double hv = gs[idx] * ga;
            hsum += hv;
            hxsum += hv * xhat;
          }
        }
        const double hmean = hsum / static_cast<double>(gsize);
        const double hxmean = hxsum / static_cast<double>(gsize);
        float* dxs = dx.data() + base;
        for (int64_t cc = 0; cc < cpg; ++cc) {
          const double ga = gamma[g * cpg + cc];
          double dg = 0.0, db = 0.0;
          for (int64_t i = 0; i < h * w; ++i) {
            const int64_t idx = cc * h * w + i;
            const double xhat = (xs[idx] - mu) * is;
            const double hv = gs[idx] * ga;
            dxs[idx] += static_cast<float>(is * (hv - hmean - xhat * hxmean));
            dg += gs[idx] * xhat;
            db += gs[idx];
          }
          dgamma[g * cpg + cc] += static_cast<float>(dg);
          dbeta[g * cpg + cc] += static_cast<float>(db);
        }
      }
    }
  };
  return out_id;
}

NodeId Tape::silu(NodeId xid) {
  const Tensor& x = val(xid);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    out[i] = static_cast<float>(v * sigmoid(v));
  }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, out_id]() {
    const Tensor& g = grad_buffer(out_id);
    const Tensor& x = val(xid);
    Tensor& dx = grad_buffer(xid);
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double s = sigmoid(x[i]);
      dx[i] += static_cast<float>(g[i] * s * (1.0 + x[i] * (1.0 - s)));
    }
  };
  return out_id;
}

NodeId Tape::leaky_relu(NodeId xid, float negative_slope) {
  const Tensor& x = val(xid);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.0f ? x[i] : negative_slope * x[i];
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, out_id, negative_slope]() {
    const Tensor& g = grad_buffer(out_id);
    const Tensor& x = val(xid);
    Tensor& dx = grad_buffer(xid);
    for (int64_t i = 0; i < x.numel(); ++i) dx[i] += x[i] > 0.0f ? g[i] : negative_slope * g[i];
  };
  return out_id;
}

NodeId Tape::avg_pool2(NodeId xid) {
  const Tensor& x = val(xid);
  require_rank4(x, "avg_pool2 input");
  const int64_t bs = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ValidationError("avg_pool2: spatial dims must be even");
  Tensor out({bs, c, h / 2, w / 2});
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h / 2; ++y)
        for (int64_t xx = 0; xx < w / 2; ++xx)
          out.at(b, ch, y, xx) = 0.25f * (x.at(b, ch, 2 * y, 2 * xx) + x.at(b, ch, 2 * y, 2 * xx + 1) +
                                          x.at(b, ch, 2 * y + 1, 2 * xx) + x.at(b, ch, 2 * y + 1, 2 * xx + 1));
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, out_id, bs, c, h, w]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& dx = grad_buffer(xid);
    for (int64_t b = 0; b < bs; ++b)
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h / 2; ++y)
          for (int64_t xx = 0; xx < w / 2; ++xx) {
            const float q = 0.25f * g.at(b, ch, y, xx);
            dx.at(b, ch, 2 * y, 2 * xx) += q;
            dx.at(b, ch, 2 * y, 2 * xx + 1) += q;
            dx.at(b, ch, 2 * y + 1, 2 * xx) += q;
            dx.at(b, ch, 2 * y + 1, 2 * xx + 1) += q;
          }
  };
  return out_id;
}

NodeId Tape::upsample_nearest2(NodeId xid) {
  const Tensor& x = val(xid);
  require_rank4(x, "upsample_nearest2 input");
  const int64_t bs = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out({bs, c, 2 * h, 2 * w});
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx) {
          const float v = x.at(b, ch, y, xx);
          out.at(b, ch, 2 * y, 2 * xx) = v;
          out.at(b, ch, 2 * y, 2 * xx + 1) = v;
          out.at(b, ch, 2 * y + 1, 2 * xx) = v;
          out.at(b, ch, 2 * y + 1, 2 * xx + 1) = v;
        }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, out_id, bs, c, h, w]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& dx = grad_buffer(xid);
    for (int64_t b = 0; b < bs; ++b)
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t xx = 0; xx < w; ++xx)
            dx.at(b, ch, y, xx) += g.at(b, ch, 2 * y, 2 * xx) + g.at(b, ch, 2 * y, 2 * xx + 1) +
                                   g.at(b, ch, 2 * y + 1, 2 * xx) + g.at(b, ch, 2 * y + 1, 2 * xx + 1);
  };
  return out_id;
}

NodeId Tape::concat_channels(NodeId aid, NodeId bid) {
  const Tensor& a = val(aid);
  const Tensor& b = val(bid);
  require_rank4(a, "concat_channels lhs");
  require_rank4(b, "concat_channels rhs");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ValidationError("concat_channels: non-channel dims must match");
  const int64_t bs = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  Tensor out({bs, ca + cb, h, w});
  const int64_t plane = h * w;
  for (int64_t bi = 0; bi < bs; ++bi) {
    std::copy(a.data() + bi * ca * plane, a.data() + (bi + 1) * ca * plane,
              out.data() + bi * (ca + cb) * plane);
    std::copy(b.data() + bi * cb * plane, b.data() + (bi + 1) * cb * plane,
              out.data() + (bi * (ca + cb) + ca) * plane);
  }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, aid, bid, out_id, bs, ca, cb, plane]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& da = grad_buffer(aid);
    Tensor& db = grad_buffer(bid);
    for (int64_t bi = 0; bi < bs; ++bi) {
      const float* gsrc = g.data() + bi * (ca + cb) * plane;
      float* dap = da.data() + bi * ca * plane;
      float* dbp = db.data() + bi * cb * plane;
      for (int64_t i = 0; i < ca * plane; ++i) dap[i] += gsrc[i];
      for (int64_t i = 0; i < cb * plane; ++i) dbp[i] += gsrc[ca * plane + i];
    }
  };
  return out_id;
}

NodeId Tape::add(NodeId aid, NodeId bid) {
  const Tensor& a = val(aid);
  const Tensor& b = val(bid);
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, aid, bid, out_id]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& da = grad_buffer(aid);
    Tensor& db = grad_buffer(bid);
    for (int64_t i = 0; i < g.numel(); ++i) {
      da[i] += g[i];
      db[i] += g[i];
    }
  };
  return out_id;
}

NodeId Tape::add_channel_bias(NodeId xid, NodeId vid) {
  const Tensor& x = val(xid);
  const Tensor& v = val(vid);
  require_rank4(x, "add_channel_bias input");
  if (v.rank() != 2 || v.dim(0) != x.dim(0) || v.dim(1) != x.dim(1))
    throw ValidationError("add_channel_bias: bias must be (batch, channels)");
  const int64_t bs = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const float bias = v[b * c + ch];
      const float* xs = x.data() + (b * c + ch) * plane;
      float* os = out.data() + (b * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) os[i] = xs[i] + bias;
    }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, vid, out_id, bs, c, plane]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& dx = grad_buffer(xid);
    Tensor& dv = grad_buffer(vid);
    for (int64_t b = 0; b < bs; ++b)
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* gs = g.data() + (b * c + ch) * plane;
        float* dxs = dx.data() + (b * c + ch) * plane;
        double acc = 0.0;
        for (int64_t i = 0; i < plane; ++i) {
          dxs[i] += gs[i];
          acc += gs[i];
        }
        dv[b * c + ch] += static_cast<float>(acc);
      }
  };
  return out_id;
}

NodeId Tape::global_avg_pool(NodeId xid) {
  const Tensor& x = val(xid);
  require_rank4(x, "global_avg_pool input");
  const int64_t bs = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor out({bs, c});
  for (int64_t b = 0; b < bs; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const float* xs = x.data() + (b * c + ch) * plane;
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i) acc += xs[i];
      out[b * c + ch] = static_cast<float>(acc / static_cast<double>(plane));
    }
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, xid, out_id, bs, c, plane]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& dx = grad_buffer(xid);
    const float inv = 1.0f / static_cast<float>(plane);
    for (int64_t b = 0; b < bs; ++b)
      for (int64_t ch = 0; ch < c; ++ch) {
        const float gv = g[b * c + ch] * inv;
        float* dxs = dx.data() + (b * c + ch) * plane;
        for (int64_t i = 0; i < plane; ++i) dxs[i] += gv;
      }
  };
  return out_id;
}

NodeId Tape::reverse_combine(const Tensor& x_t, NodeId eid, const Tensor& z,
                             std::span<const float> inv_sqrt_alpha,
                             std::span<const float> eps_coeff, std::span<const float> sigma) {
  const Tensor& e = val(eid);
  require_same_shape(x_t, e, "reverse_combine");
  require_same_shape(x_t, z, "reverse_combine");
  if (x_t.rank() < 1 || static_cast<int64_t>(inv_sqrt_alpha.size()) != x_t.dim(0) ||
      eps_coeff.size() != inv_sqrt_alpha.size() || sigma.size() != inv_sqrt_alpha.size())
    throw ValidationError("reverse_combine: one coefficient triple per batch item required");

  const int64_t bs = x_t.dim(0);
  const int64_t per_item = x_t.numel() / bs;
  Tensor out(x_t.shape());
  for (int64_t b = 0; b < bs; ++b) {
    const float a = inv_sqrt_alpha[static_cast<size_t>(b)];
    const float c = eps_coeff[static_cast<size_t>(b)];
    const float s = sigma[static_cast<size_t>(b)];
    const float* xs = x_t.data() + b * per_item;
    const float* es = e.data() + b * per_item;
    const float* zs = z.data() + b * per_item;
    float* os = out.data() + b * per_item;
    for (int64_t i = 0; i < per_item; ++i) os[i] = a * (xs[i] - c * es[i]) + s * zs[i];
  }
  NodeId out_id = push(std::move(out), nullptr);
  auto deps = std::make_shared<std::vector<float>>(static_cast<size_t>(bs));
  for (int64_t b = 0; b < bs; ++b)
    (*deps)[static_cast<size_t>(b)] =
        -inv_sqrt_alpha[static_cast<size_t>(b)] * eps_coeff[static_cast<size_t>(b)];
  nodes_[static_cast<size_t>(out_id)].backfn = [this, eid, out_id, deps, bs, per_item]() {
    const Tensor& g = grad_buffer(out_id);
    Tensor& de = grad_buffer(eid);
    for (int64_t b = 0; b < bs; ++b) {
      const float d = (*deps)[static_cast<size_t>(b)];
      const float* gs = g.data() + b * per_item;
      float* des = de.data() + b * per_item;
      for (int64_t i = 0; i < per_item; ++i) des[i] += d * gs[i];
    }
  };
  return out_id;
}

NodeId Tape::mse_vs(NodeId pid, const Tensor& target) {
  const Tensor& p = val(pid);
  require_same_shape(p, target, "mse");
  double acc = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double d = static_cast<double>(p[i]) - target[i];
    acc += d * d;
  }
  const double n = static_cast<double>(p.numel());
  Tensor out({1});
  out[0] = static_cast<float>(acc / n);
  NodeId out_id = push(std::move(out), nullptr);
  auto tgt = std::make_shared<Tensor>(target);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, pid, out_id, tgt, n]() {
    const float g = grad_buffer(out_id)[0];
    const Tensor& p = val(pid);
    Tensor& dp = grad_buffer(pid);
    const float scale = static_cast<float>(2.0 / n) * g;
    for (int64_t i = 0; i < p.numel(); ++i) dp[i] += scale * (p[i] - (*tgt)[i]);
  };
  return out_id;
}

NodeId Tape::mean_softplus_neg(NodeId lid) {
  const Tensor& l = val(lid);
  const double n = static_cast<double>(l.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < l.numel(); ++i) acc += softplus(-static_cast<double>(l[i]));
  Tensor out({1});
  out[0] = static_cast<float>(acc / n);
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, lid, out_id, n]() {
    const float g = grad_buffer(out_id)[0];
    const Tensor& l = val(lid);
    Tensor& dl = grad_buffer(lid);
    for (int64_t i = 0; i < l.numel(); ++i)
      dl[i] += static_cast<float>(g * (sigmoid(l[i]) - 1.0) / n);
  };
  return out_id;
}

NodeId Tape::bce_logits(NodeId rid, NodeId fid) {
  const Tensor& r = val(rid);
  const Tensor& f = val(fid);
  const double nr = static_cast<double>(r.numel());
  const double nf = static_cast<double>(f.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < r.numel(); ++i) acc += softplus(-static_cast<double>(r[i])) / nr;
  for (int64_t i = 0; i < f.numel(); ++i) acc += softplus(static_cast<double>(f[i])) / nf;
  Tensor out({1});
  out[0] = static_cast<float>(acc);
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, rid, fid, out_id, nr, nf]() {
    const float g = grad_buffer(out_id)[0];
    const Tensor& r = val(rid);
    const Tensor& f = val(fid);
    Tensor& dr = grad_buffer(rid);
    Tensor& df = grad_buffer(fid);
    for (int64_t i = 0; i < r.numel(); ++i)
      dr[i] += static_cast<float>(g * (sigmoid(r[i]) - 1.0) / nr);
    for (int64_t i = 0; i < f.numel(); ++i) df[i] += static_cast<float>(g * sigmoid(f[i]) / nf);
  };
  return out_id;
}

NodeId Tape::axpy_scalar(NodeId aid, double coeff, NodeId bid) {
  const Tensor& a = val(aid);
  const Tensor& b = val(bid);
  if (a.numel() != 1 || b.numel() != 1) throw ValidationError("axpy_scalar: scalar nodes only");
  Tensor out({1});
  out[0] = static_cast<float>(static_cast<double>(a[0]) + coeff * b[0]);
  NodeId out_id = push(std::move(out), nullptr);
  nodes_[static_cast<size_t>(out_id)].backfn = [this, aid, bid, out_id, coeff]() {
    const float g = grad_buffer(out_id)[0];
    grad_buffer(aid)[0] += g;
    grad_buffer(bid)[0] += static_cast<float>(coeff * g);
  };
  return out_id;
}

}  // namespace addm
