#include "ttt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ttt/error.hpp"
#include "ttt/kernels.hpp"

namespace ttt {

ModelConfig ModelConfig::for_tier(std::string_view tier, int vocab_size) {
    ModelConfig c;
    c.tier = std::string(tier);
    c.vocab_size = vocab_size;
    if (tier == "tiny") {
        c.d_model = 64, c.n_heads = 4, c.n_enc_layers = 2, c.n_dec_layers = 2;
    } else if (tier == "small") {
        c.d_model = 128, c.n_heads = 8, c.n_enc_layers = 4, c.n_dec_layers = 4;
    } else if (tier == "medium") {
        c.d_model = 256, c.n_heads = 8, c.n_enc_layers = 4, c.n_dec_layers = 6;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown tier '" + std::string(tier) + "' (tiny, small, medium)");
    }
    c.d_ff = 4 * c.d_model;
    c.validate();
    return c;
}

void ModelConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, std::string("model config: ") + what);
    };
    require(image_size > 0 && patch_size > 0 && image_size % patch_size == 0, "image_size must be a multiple of patch_size");
    require(d_model > 0 && n_heads > 0 && d_model % n_heads == 0, "d_model must be divisible by n_heads");
    require(n_enc_layers >= 1 && n_dec_layers >= 1, "need at least one encoder and one decoder layer");
    require(d_ff > 0, "d_ff must be positive");
    require(vocab_size > kSpecialCount, "vocabulary must contain content words");
    require(max_seq_len > 1, "max_seq_len must exceed 1");
    require(dropout == 0.0, "dropout is not supported");
}

ParamLayout::ParamLayout(const ModelConfig& config) {
    config.validate();
    const int d = config.d_model;
    auto add = [&](std::string name, std::vector<std::int64_t> shape) {
        std::size_t size = 1;
        for (auto s : shape) size *= static_cast<std::size_t>(s);
        tensors.push_back(TensorSpec{std::move(name), std::move(shape), total, size});
        total += size;
        return tensors.back().offset;
    };
    auto linear = [&](const std::string& prefix, int in, int out) {
        Linear l;
        l.in = in;
        l.out = out;
        l.w = add(prefix + ".w", {in, out});
        l.b = add(prefix + ".b", {out});
        return l;
    };
    auto norm = [&](const std::string& prefix) {
        Norm n;
        n.g = add(prefix + ".g", {d});
        n.b = add(prefix + ".b", {d});
        return n;
    };
    auto attention = [&](const std::string& prefix) {
        Attention a;
        a.q = linear(prefix + ".q", d, d);
        a.k = linear(prefix + ".k", d, d);
        a.v = linear(prefix + ".v", d, d);
        a.o = linear(prefix + ".o", d, d);
        return a;
    };

    patch = linear("enc.patch", config.patch_dim(), d);
    enc_pos = add("enc.pos", {config.num_patches(), d});
    for (int l = 0; l < config.n_enc_layers; ++l) {
        const std::string p = "enc." + std::to_string(l);
        EncoderLayer layer;
        layer.ln1 = norm(p + ".ln1");
        layer.attn = attention(p + ".attn");
        layer.ln2 = norm(p + ".ln2");
        layer.fc1 = linear(p + ".fc1", d, config.d_ff);
        layer.fc2 = linear(p + ".fc2", config.d_ff, d);
        encoder.push_back(layer);
    }
    enc_norm = norm("enc.norm");
    tok_emb = add("dec.tok", {config.vocab_size, d});
    dec_pos = add("dec.pos", {config.max_seq_len, d});
    for (int l = 0; l < config.n_dec_layers; ++l) {
        const std::string p = "dec." + std::to_string(l);
        DecoderLayer layer;
        layer.ln1 = norm(p + ".ln1");
        layer.self_attn = attention(p + ".self");
        layer.ln2 = norm(p + ".ln2");
        layer.cross_attn = attention(p + ".cross");
        layer.ln3 = norm(p + ".ln3");
        layer.fc1 = linear(p + ".fc1", d, config.d_ff);
        layer.fc2 = linear(p + ".fc2", config.d_ff, d);
        decoder.push_back(layer);
    }
    dec_norm = norm("dec.norm");
    head = add("dec.head.w", {d, config.vocab_size});
}

const TensorSpec* ParamLayout::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

namespace {

constexpr double kNormEps = 1e-5;

template <class T>
T* grow(std::vector<T>& buffer, std::size_t n) {
    if (buffer.size() < n) buffer.resize(n);
    return buffer.data();
}

template <class T>
struct Scratch {
    std::vector<T> t0, t1;
};

// ---------------------------------------------------------------- linear

template <class T>
void linear_forward(const T* params, const ParamLayout::Linear& l, const T* x, int rows, T* y) {
    kernels::gemm(rows, l.out, l.in, x, l.in, params + l.w, l.out, y, l.out, false);
    const T* bias = params + l.b;
    for (int i = 0; i < rows; ++i) {
        T* row = y + static_cast<std::ptrdiff_t>(i) * l.out;
        for (int j = 0; j < l.out; ++j) row[j] += bias[j];
    }
}

// Accumulates weight and bias grads; dx (if given) is accumulated too.
template <class T>
void linear_backward(const T* params, T* grads, const ParamLayout::Linear& l, const T* x, int rows, const T* dy, T* dx,
                     Scratch<T>& scratch) {
    T* xt = grow(scratch.t0, static_cast<std::size_t>(l.in) * rows);
    kernels::transpose(rows, l.in, x, l.in, xt, rows);
    kernels::gemm(l.in, l.out, rows, xt, rows, dy, l.out, grads + l.w, l.out, true);
    T* db = grads + l.b;
    for (int i = 0; i < rows; ++i) {
        const T* row = dy + static_cast<std::ptrdiff_t>(i) * l.out;
        for (int j = 0; j < l.out; ++j) db[j] += row[j];
    }
    if (dx) {
        T* wt = grow(scratch.t1, static_cast<std::size_t>(l.in) * l.out);
        kernels::transpose(l.in, l.out, params + l.w, l.out, wt, l.in);
        kernels::gemm(rows, l.in, l.out, dy, l.out, wt, l.in, dx, l.in, true);
    }
}

// ---------------------------------------------------------------- layer norm

template <class T>
struct NormTape {
    std::vector<T> xhat, rstd, y;
};

template <class T>
void norm_forward(const T* params, const ParamLayout::Norm& n, const T* x, int rows, int d, NormTape<T>& tape) {
    tape.xhat.resize(static_cast<std::size_t>(rows) * d);
    tape.rstd.resize(static_cast<std::size_t>(rows));
    tape.y.resize(static_cast<std::size_t>(rows) * d);
    const T* g = params + n.g;
    const T* b = params + n.b;
    for (int i = 0; i < rows; ++i) {
        const T* xr = x + static_cast<std::ptrdiff_t>(i) * d;
        T mean = 0;
        for (int j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<T>(d);
        const T rstd = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
        tape.rstd[static_cast<std::size_t>(i)] = rstd;
        T* xh = tape.xhat.data() + static_cast<std::ptrdiff_t>(i) * d;
        T* yr = tape.y.data() + static_cast<std::ptrdiff_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            xh[j] = (xr[j] - mean) * rstd;
            yr[j] = xh[j] * g[j] + b[j];
        }
    }
}

// Accumulates into dx.
template <class T>
void norm_backward(const T* params, T* grads, const ParamLayout::Norm& n, const NormTape<T>& tape, const T* dy,
                   int rows, int d, T* dx) {
    const T* g = params + n.g;
    T* dg = grads + n.g;
    T* db = grads + n.b;
    for (int i = 0; i < rows; ++i) {
        const T* dyr = dy + static_cast<std::ptrdiff_t>(i) * d;
        const T* xh = tape.xhat.data() + static_cast<std::ptrdiff_t>(i) * d;
        T sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int j = 0; j < d; ++j) {
            const T dxhat = dyr[j] * g[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xh[j];
            dg[j] += dyr[j] * xh[j];
            db[j] += dyr[j];
        }
        const T inv_d = T(1) / static_cast<T>(d);
        const T rstd = tape.rstd[static_cast<std::size_t>(i)];
        T* dxr = dx + static_cast<std::ptrdiff_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            const T dxhat = dyr[j] * g[j];
            dxr[j] += rstd * (dxhat - sum_dxhat * inv_d - xh[j] * sum_dxhat_xhat * inv_d);
        }
    }
}

// ---------------------------------------------------------------- gelu (tanh form)

template <class T>
T gelu(T x) {
    const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template <class T>
T gelu_grad(T x) {
    const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    const T t = std::tanh(c * (x + T(0.044715) * x * x * x));
    return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * T(0.044715) * x * x);
}

// ---------------------------------------------------------------- attention

template <class T>
struct AttnTape {
    std::vector<T> q, k, v, probs, merged;  // probs: [heads, lq, lk]
};

template <class T>
void attention_forward(const T* params, const ParamLayout::Attention& a, const T* xq, int lq, const T* xkv, int lk,
                       bool causal, int heads, AttnTape<T>& tape, T* out, Scratch<T>& scratch) {
    const int d = a.q.in;
    const int hd = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    tape.q.resize(static_cast<std::size_t>(lq) * d);
    tape.k.resize(static_cast<std::size_t>(lk) * d);
    tape.v.resize(static_cast<std::size_t>(lk) * d);
    tape.probs.assign(static_cast<std::size_t>(heads) * lq * lk, T(0));
    tape.merged.resize(static_cast<std::size_t>(lq) * d);
    linear_forward(params, a.q, xq, lq, tape.q.data());
    linear_forward(params, a.k, xkv, lk, tape.k.data());
    linear_forward(params, a.v, xkv, lk, tape.v.data());

    T* kt = grow(scratch.t0, static_cast<std::size_t>(hd) * lk);
    for (int h = 0; h < heads; ++h) {
        T* probs = tape.probs.data() + static_cast<std::ptrdiff_t>(h) * lq * lk;
        kernels::transpose(lk, hd, tape.k.data() + h * hd, d, kt, lk);
        kernels::gemm(lq, lk, hd, tape.q.data() + h * hd, d, kt, lk, probs, lk, false);
        for (int i = 0; i < lq; ++i) {
            T* row = probs + static_cast<std::ptrdiff_t>(i) * lk;
            const int visible = causal ? i + 1 : lk;
            T max_v = -std::numeric_limits<T>::infinity();
            for (int j = 0; j < visible; ++j) {
                row[j] *= scale;
                max_v = std::max(max_v, row[j]);
            }
            T sum = 0;
            for (int j = 0; j < visible; ++j) {
                row[j] = std::exp(row[j] - max_v);
                sum += row[j];
            }
            const T inv = T(1) / sum;
            for (int j = 0; j < visible; ++j) row[j] *= inv;
            for (int j = visible; j < lk; ++j) row[j] = T(0);
        }
        kernels::gemm(lq, hd, lk, probs, lk, tape.v.data() + h * hd, d, tape.merged.data() + h * hd, d, false);
    }
    linear_forward(params, a.o, tape.merged.data(), lq, out);
}

// Accumulates into dxq and dxkv (which may alias for self-attention).
template <class T>
void attention_backward(const T* params, T* grads, const ParamLayout::Attention& a, const T* xq, int lq, const T* xkv,
                        int lk, int heads, const AttnTape<T>& tape, const T* dout, T* dxq, T* dxkv,
                        Scratch<T>& scratch) {
    const int d = a.q.in;
    const int hd = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));

    std::vector<T> dmerged(static_cast<std::size_t>(lq) * d, T(0));
    linear_backward(params, grads, a.o, tape.merged.data(), lq, dout, dmerged.data(), scratch);

    std::vector<T> dq(static_cast<std::size_t>(lq) * d), dk(static_cast<std::size_t>(lk) * d),
        dv(static_cast<std::size_t>(lk) * d);
    std::vector<T> dprobs(static_cast<std::size_t>(lq) * lk);
    std::vector<T> tmp(static_cast<std::size_t>(std::max(lq, lk)) * std::max({lq, lk, hd}));
    for (int h = 0; h < heads; ++h) {
        const T* probs = tape.probs.data() + static_cast<std::ptrdiff_t>(h) * lq * lk;
        const T* dmh = dmerged.data() + h * hd;
        // dP = dO V^T
        kernels::transpose(lk, hd, tape.v.data() + h * hd, d, tmp.data(), lk);
        kernels::gemm(lq, lk, hd, dmh, d, tmp.data(), lk, dprobs.data(), lk, false);
        // dV = P^T dO
        kernels::transpose(lq, lk, probs, lk, tmp.data(), lq);
        kernels::gemm(lk, hd, lq, tmp.data(), lq, dmh, d, dv.data() + h * hd, d, false);
        // softmax backward, scale folded in
        for (int i = 0; i < lq; ++i) {
            const T* p = probs + static_cast<std::ptrdiff_t>(i) * lk;
            T* ds = dprobs.data() + static_cast<std::ptrdiff_t>(i) * lk;
            T row_dot = 0;
            for (int j = 0; j < lk; ++j) row_dot += p[j] * ds[j];
            for (int j = 0; j < lk; ++j) ds[j] = p[j] * (ds[j] - row_dot) * scale;
        }
        // dQ = dS K
        kernels::gemm(lq, hd, lk, dprobs.data(), lk, tape.k.data() + h * hd, d, dq.data() + h * hd, d, false);
        // dK = dS^T Q
        kernels::transpose(lq, lk, dprobs.data(), lk, tmp.data(), lq);
        kernels::gemm(lk, hd, lq, tmp.data(), lq, tape.q.data() + h * hd, d, dk.data() + h * hd, d, false);
    }
    linear_backward(params, grads, a.q, xq, lq, dq.data(), dxq, scratch);
    linear_backward(params, grads, a.k, xkv, lk, dk.data(), dxkv, scratch);
    linear_backward(params, grads, a.v, xkv, lk, dv.data(), dxkv, scratch);
}

// ---------------------------------------------------------------- feed-forward

template <class T>
struct MlpTape {
    std::vector<T> pre, act;
};

template <class T>
void mlp_forward(const T* params, const ParamLayout::Linear& fc1, const ParamLayout::Linear& fc2, const T* x,
                 int rows, MlpTape<T>& tape, T* out) {
    tape.pre.resize(static_cast<std::size_t>(rows) * fc1.out);
    tape.act.resize(tape.pre.size());
    linear_forward(params, fc1, x, rows, tape.pre.data());
    std::transform(tape.pre.begin(), tape.pre.end(), tape.act.begin(), [](T v) { return gelu(v); });
    linear_forward(params, fc2, tape.act.data(), rows, out);
}

template <class T>
void mlp_backward(const T* params, T* grads, const ParamLayout::Linear& fc1, const ParamLayout::Linear& fc2,
                  const T* x, int rows, const MlpTape<T>& tape, const T* dout, T* dx, Scratch<T>& scratch) {
    std::vector<T> dact(tape.act.size(), T(0));
    linear_backward(params, grads, fc2, tape.act.data(), rows, dout, dact.data(), scratch);
    for (std::size_t i = 0; i < dact.size(); ++i) dact[i] *= gelu_grad(tape.pre[i]);
    linear_backward(params, grads, fc1, x, rows, dact.data(), dx, scratch);
}

// ---------------------------------------------------------------- encoder / decoder tapes

template <class T>
struct EncoderLayerTape {
    NormTape<T> ln1, ln2;
    AttnTape<T> attn;
    MlpTape<T> mlp;
};

template <class T>
struct EncoderTape {
    std::vector<T> patches;
    std::vector<EncoderLayerTape<T>> layers;
    NormTape<T> final_norm;  // y holds the encoder states
};

template <class T>
struct DecoderLayerTape {
    NormTape<T> ln1, ln2, ln3;
    AttnTape<T> self_attn, cross_attn;
    MlpTape<T> mlp;
};

template <class T>
struct DecoderTape {
    std::vector<DecoderLayerTape<T>> layers;
    NormTape<T> final_norm;
    std::vector<T> logits;
};

// Patches carry ink (1 - pixel) so blank paper contributes nothing to the projection. Without this the
// all-white background puts the same large vector into every patch and the encoder learns very slowly.
template <class T>
void extract_patches(const ModelConfig& c, std::span<const T> image, std::vector<T>& patches) {
    const int side = c.patches_per_side();
    const int ps = c.patch_size;
    patches.resize(static_cast<std::size_t>(c.num_patches()) * c.patch_dim());
    for (int pr = 0; pr < side; ++pr) {
        for (int pc = 0; pc < side; ++pc) {
            T* dst = patches.data() + static_cast<std::ptrdiff_t>(pr * side + pc) * c.patch_dim();
            for (int i = 0; i < ps; ++i) {
                for (int j = 0; j < ps; ++j) {
                    dst[i * ps + j] = T(1) - image[static_cast<std::size_t>((pr * ps + i) * c.image_size + pc * ps + j)];
                }
            }
        }
    }
}

template <class T>
void encoder_forward(const ModelConfig& c, const ParamLayout& L, const T* params, std::span<const T> image,
                     EncoderTape<T>& tape, Scratch<T>& scratch) {
    const int n = c.num_patches(), d = c.d_model;
    extract_patches(c, image, tape.patches);
    std::vector<T> x(static_cast<std::size_t>(n) * d), branch(static_cast<std::size_t>(n) * d);
    linear_forward(params, L.patch, tape.patches.data(), n, x.data());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += params[L.enc_pos + i];
    tape.layers.resize(L.encoder.size());
    for (std::size_t l = 0; l < L.encoder.size(); ++l) {
        const auto& ref = L.encoder[l];
        auto& lt = tape.layers[l];
        norm_forward(params, ref.ln1, x.data(), n, d, lt.ln1);
        attention_forward(params, ref.attn, lt.ln1.y.data(), n, lt.ln1.y.data(), n, false, c.n_heads, lt.attn,
                          branch.data(), scratch);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
        norm_forward(params, ref.ln2, x.data(), n, d, lt.ln2);
        mlp_forward(params, ref.fc1, ref.fc2, lt.ln2.y.data(), n, lt.mlp, branch.data());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
    }
    norm_forward(params, L.enc_norm, x.data(), n, d, tape.final_norm);
}

template <class T>
void encoder_backward(const ModelConfig& c, const ParamLayout& L, const T* params, T* grads,
                      const EncoderTape<T>& tape, const T* d_states, Scratch<T>& scratch) {
    const int n = c.num_patches(), d = c.d_model;
    std::vector<T> dx(static_cast<std::size_t>(n) * d, T(0)), dbranch(dx.size());
    norm_backward(params, grads, L.enc_norm, tape.final_norm, d_states, n, d, dx.data());
    for (std::size_t l = L.encoder.size(); l-- > 0;) {
        const auto& ref = L.encoder[l];
        const auto& lt = tape.layers[l];
        std::fill(dbranch.begin(), dbranch.end(), T(0));
        mlp_backward(params, grads, ref.fc1, ref.fc2, lt.ln2.y.data(), n, lt.mlp, dx.data(), dbranch.data(), scratch);
        norm_backward(params, grads, ref.ln2, lt.ln2, dbranch.data(), n, d, dx.data());
        std::fill(dbranch.begin(), dbranch.end(), T(0));
        attention_backward(params, grads, ref.attn, lt.ln1.y.data(), n, lt.ln1.y.data(), n, c.n_heads, lt.attn,
                           dx.data(), dbranch.data(), dbranch.data(), scratch);
        norm_backward(params, grads, ref.ln1, lt.ln1, dbranch.data(), n, d, dx.data());
    }
    for (std::size_t i = 0; i < dx.size(); ++i) grads[L.enc_pos + i] += dx[i];
    linear_backward<T>(params, grads, L.patch, tape.patches.data(), n, dx.data(), nullptr, scratch);
}

template <class T>
void decoder_forward_tape(const ModelConfig& c, const ParamLayout& L, const T* params, std::span<const TokenId> ids,
                          const T* states, DecoderTape<T>& tape, Scratch<T>& scratch) {
    const int len = static_cast<int>(ids.size()), d = c.d_model, n = c.num_patches();
    std::vector<T> x(static_cast<std::size_t>(len) * d), branch(x.size());
    for (int t = 0; t < len; ++t) {
        const T* tok = params + L.tok_emb + static_cast<std::size_t>(ids[static_cast<std::size_t>(t)]) * d;
        const T* pos = params + L.dec_pos + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(t * d + j)] = tok[j] + pos[j];
    }
    tape.layers.resize(L.decoder.size());
    for (std::size_t l = 0; l < L.decoder.size(); ++l) {
        const auto& ref = L.decoder[l];
        auto& lt = tape.layers[l];
        norm_forward(params, ref.ln1, x.data(), len, d, lt.ln1);
        attention_forward(params, ref.self_attn, lt.ln1.y.data(), len, lt.ln1.y.data(), len, true, c.n_heads,
                          lt.self_attn, branch.data(), scratch);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
        norm_forward(params, ref.ln2, x.data(), len, d, lt.ln2);
        attention_forward(params, ref.cross_attn, lt.ln2.y.data(), len, states, n, false, c.n_heads, lt.cross_attn,
                          branch.data(), scratch);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
        norm_forward(params, ref.ln3, x.data(), len, d, lt.ln3);
        mlp_forward(params, ref.fc1, ref.fc2, lt.ln3.y.data(), len, lt.mlp, branch.data());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
    }
    norm_forward(params, L.dec_norm, x.data(), len, d, tape.final_norm);
    tape.logits.resize(static_cast<std::size_t>(len) * c.vocab_size);
    kernels::gemm(len, c.vocab_size, d, tape.final_norm.y.data(), d, params + L.head, c.vocab_size,
                  tape.logits.data(), c.vocab_size, false);
}

// Accumulates parameter grads and d(states).
template <class T>
void decoder_backward(const ModelConfig& c, const ParamLayout& L, const T* params, T* grads,
                      std::span<const TokenId> ids, const T* states, const DecoderTape<T>& tape, const T* dlogits,
                      T* d_states, Scratch<T>& scratch) {
    const int len = static_cast<int>(ids.size()), d = c.d_model, n = c.num_patches(), V = c.vocab_size;
    std::vector<T> dz(static_cast<std::size_t>(len) * d, T(0));
    {
        T* zt = grow(scratch.t0, static_cast<std::size_t>(d) * len);
        kernels::transpose(len, d, tape.final_norm.y.data(), d, zt, len);
        kernels::gemm(d, V, len, zt, len, dlogits, V, grads + L.head, V, true);
        T* wt = grow(scratch.t1, static_cast<std::size_t>(d) * V);
        kernels::transpose(d, V, params + L.head, V, wt, d);
        kernels::gemm(len, d, V, dlogits, V, wt, d, dz.data(), d, false);
    }
    std::vector<T> dx(dz.size(), T(0)), dbranch(dz.size());
    norm_backward(params, grads, L.dec_norm, tape.final_norm, dz.data(), len, d, dx.data());
    for (std::size_t l = L.decoder.size(); l-- > 0;) {
        const auto& ref = L.decoder[l];
        const auto& lt = tape.layers[l];
        std::fill(dbranch.begin(), dbranch.end(), T(0));
        mlp_backward(params, grads, ref.fc1, ref.fc2, lt.ln3.y.data(), len, lt.mlp, dx.data(), dbranch.data(), scratch);
        norm_backward(params, grads, ref.ln3, lt.ln3, dbranch.data(), len, d, dx.data());
        std::fill(dbranch.begin(), dbranch.end(), T(0));
        attention_backward(params, grads, ref.cross_attn, lt.ln2.y.data(), len, states, n, c.n_heads, lt.cross_attn,
                           dx.data(), dbranch.data(), d_states, scratch);
        norm_backward(params, grads, ref.ln2, lt.ln2, dbranch.data(), len, d, dx.data());
        std::fill(dbranch.begin(), dbranch.end(), T(0));
        attention_backward(params, grads, ref.self_attn, lt.ln1.y.data(), len, lt.ln1.y.data(), len, c.n_heads,
                           lt.self_attn, dx.data(), dbranch.data(), dbranch.data(), scratch);
        norm_backward(params, grads, ref.ln1, lt.ln1, dbranch.data(), len, d, dx.data());
    }
    for (int t = 0; t < len; ++t) {
        T* tok = grads + L.tok_emb + static_cast<std::size_t>(ids[static_cast<std::size_t>(t)]) * d;
        T* pos = grads + L.dec_pos + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) {
            tok[j] += dx[static_cast<std::size_t>(t * d + j)];
            pos[j] += dx[static_cast<std::size_t>(t * d + j)];
        }
    }
}

template <class T>
int argmax_row(const T* row, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

void check_example(const ModelConfig& c, const Example& ex) {
    if (ex.image.size() != static_cast<std::size_t>(c.image_size) * c.image_size) {
        throw Error(ErrorCode::ShapeMismatch, "image must hold " + std::to_string(c.image_size * c.image_size) + " values");
    }
    if (ex.ids.empty() || ex.ids.size() > static_cast<std::size_t>(c.max_seq_len)) {
        throw Error(ErrorCode::SequenceTooLong, "sequence length " + std::to_string(ex.ids.size()) + " outside [1, " +
                                                    std::to_string(c.max_seq_len) + "]");
    }
    if (ex.mask.size() != ex.ids.size() || ex.mask.back() != 0) {
        throw Error(ErrorCode::ShapeMismatch, "loss mask must match ids and leave the last position unmasked");
    }
    for (TokenId id : ex.ids) {
        if (id < 0 || id >= c.vocab_size) throw Error(ErrorCode::ShapeMismatch, "token id out of range");
    }
}

std::size_t count_masked(const ModelConfig& c, std::span<const Example> batch) {
    std::size_t masked = 0;
    for (const auto& ex : batch) {
        check_example(c, ex);
        masked += static_cast<std::size_t>(std::count(ex.mask.begin(), ex.mask.end(), std::uint8_t{1}));
    }
    if (masked == 0) throw Error(ErrorCode::EmptyMask, "batch has no masked target positions");
    return masked;
}

// Masked cross-entropy over one sequence; fills dlogits (already scaled) when requested.
template <class T>
void sequence_loss(const ModelConfig& c, const Example& ex, const std::vector<T>& logits, T grad_scale,
                   std::vector<T>* dlogits, LossStats& stats) {
    const int V = c.vocab_size;
    const int len = static_cast<int>(ex.ids.size());
    if (dlogits) dlogits->assign(logits.size(), T(0));
    for (int t = 0; t + 1 < len; ++t) {
        if (!ex.mask[static_cast<std::size_t>(t)]) continue;
        const T* row = logits.data() + static_cast<std::ptrdiff_t>(t) * V;
        const int target = ex.ids[static_cast<std::size_t>(t + 1)];
        const T max_v = *std::max_element(row, row + V);
        T sum = 0;
        for (int j = 0; j < V; ++j) sum += std::exp(row[j] - max_v);
        const T log_z = max_v + std::log(sum);
        stats.loss_sum += static_cast<double>(log_z - row[target]);
        stats.masked += 1;
        stats.correct += argmax_row(row, V) == target;
        if (dlogits) {
            T* drow = dlogits->data() + static_cast<std::ptrdiff_t>(t) * V;
            for (int j = 0; j < V; ++j) drow[j] = std::exp(row[j] - log_z) * grad_scale;
            drow[target] -= grad_scale;
        }
    }
}

template <class T>
std::vector<T> to_model_image(std::span<const float> image) {
    return std::vector<T>(image.begin(), image.end());
}

}  // namespace

template <class T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config), layout_(std::make_shared<const ParamLayout>(config)), values_(layout_->total) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    for (const auto& t : layout_->tensors) {
        const std::string_view name = t.name;
        const bool scale = name.ends_with(".g");
        const bool shift = name.ends_with(".b");
        for (std::size_t i = 0; i < t.size; ++i) {
            values_[t.offset + i] = scale ? T(1) : shift ? T(0) : static_cast<T>(normal(rng));
        }
    }
}

template <class T>
Model<T>::Model(const ModelConfig& config, std::vector<T> values)
    : config_(config), layout_(std::make_shared<const ParamLayout>(config)), values_(std::move(values)) {
    if (values_.size() != layout_->total) {
        throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(layout_->total) + " parameters, got " +
                                                  std::to_string(values_.size()));
    }
}

template <class T>
std::span<T> Model<T>::tensor(std::string_view name) {
    const TensorSpec* spec = layout_->find(name);
    if (!spec) throw Error(ErrorCode::InvalidArgument, "no tensor named " + std::string(name));
    return std::span<T>(values_).subspan(spec->offset, spec->size);
}

template <class T>
std::vector<T> Model<T>::encode_image(std::span<const T> image) const {
    if (image.size() != static_cast<std::size_t>(config_.image_size) * config_.image_size) {
        throw Error(ErrorCode::ShapeMismatch, "image must hold " + std::to_string(config_.image_size * config_.image_size) + " values");
    }
    EncoderTape<T> tape;
    Scratch<T> scratch;
    encoder_forward(config_, *layout_, values_.data(), image, tape, scratch);
    return std::move(tape.final_norm.y);
}

template <class T>
std::vector<T> Model<T>::decoder_forward(std::span<const TokenId> ids, std::span<const T> enc_states) const {
    if (ids.empty() || ids.size() > static_cast<std::size_t>(config_.max_seq_len)) {
        throw Error(ErrorCode::SequenceTooLong, "sequence length " + std::to_string(ids.size()) + " outside [1, " +
                                                    std::to_string(config_.max_seq_len) + "]");
    }
    if (enc_states.size() != static_cast<std::size_t>(config_.num_patches()) * config_.d_model) {
        throw Error(ErrorCode::ShapeMismatch, "encoder states must be [num_patches, d_model]");
    }
    for (TokenId id : ids) {
        if (id < 0 || id >= config_.vocab_size) throw Error(ErrorCode::ShapeMismatch, "token id out of range");
    }
    DecoderTape<T> tape;
    Scratch<T> scratch;
    decoder_forward_tape(config_, *layout_, values_.data(), ids, enc_states.data(), tape, scratch);
    return std::move(tape.logits);
}

template <class T>
LossStats Model<T>::loss(std::span<const Example> batch) const {
    count_masked(config_, batch);
    LossStats stats;
    Scratch<T> scratch;
    for (const auto& ex : batch) {
        const auto image = to_model_image<T>(ex.image);
        EncoderTape<T> enc;
        encoder_forward(config_, *layout_, values_.data(), std::span<const T>(image), enc, scratch);
        DecoderTape<T> dec;
        decoder_forward_tape(config_, *layout_, values_.data(), ex.ids, enc.final_norm.y.data(), dec, scratch);
        sequence_loss<T>(config_, ex, dec.logits, T(0), nullptr, stats);
    }
    return stats;
}

template <class T>
LossStats Model<T>::loss_and_gradient(std::span<const Example> batch, std::vector<T>& grad) const {
    const std::size_t masked = count_masked(config_, batch);
    const T scale = T(1) / static_cast<T>(masked);
    grad.assign(values_.size(), T(0));
    LossStats stats;
    Scratch<T> scratch;
    std::vector<T> dlogits;
    std::vector<T> d_states;
    for (const auto& ex : batch) {
        const auto image = to_model_image<T>(ex.image);
        EncoderTape<T> enc;
        encoder_forward(config_, *layout_, values_.data(), std::span<const T>(image), enc, scratch);
        DecoderTape<T> dec;
        decoder_forward_tape(config_, *layout_, values_.data(), ex.ids, enc.final_norm.y.data(), dec, scratch);
        sequence_loss<T>(config_, ex, dec.logits, scale, &dlogits, stats);
        d_states.assign(enc.final_norm.y.size(), T(0));
        decoder_backward(config_, *layout_, values_.data(), grad.data(), ex.ids, enc.final_norm.y.data(), dec,
                         dlogits.data(), d_states.data(), scratch);
        encoder_backward(config_, *layout_, values_.data(), grad.data(), enc, d_states.data(), scratch);
    }
    return stats;
}

template <class T>
Generation Model<T>::generate(std::span<const float> image, std::string_view question, const Vocabulary& vocab,
                              int max_new) const {
    std::vector<TokenId> seq{kBos};
    const auto q = encode(question, vocab);
    seq.insert(seq.end(), q.begin(), q.end());
    seq.push_back(kSep);
    if (max_new < 1 || seq.size() + static_cast<std::size_t>(max_new) > static_cast<std::size_t>(config_.max_seq_len)) {
        throw Error(ErrorCode::QuestionTooLong, "question uses " + std::to_string(seq.size()) +
                                                    " positions; no room for " + std::to_string(max_new) +
                                                    " generated tokens within " + std::to_string(config_.max_seq_len));
    }
    const auto pixels = to_model_image<T>(image);
    const auto states = encode_image(pixels);
    Generation out;
    for (int step = 0; step < max_new; ++step) {
        const auto logits = decoder_forward(seq, states);
        const T* last = logits.data() + static_cast<std::ptrdiff_t>(seq.size() - 1) * config_.vocab_size;
        const TokenId next = argmax_row(last, config_.vocab_size);
        if (next == kEos) {
            out.hit_eos = true;
            break;
        }
        out.tokens.push_back(next);
        seq.push_back(next);
    }
    out.text = decode(out.tokens, vocab);
    return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace ttt
