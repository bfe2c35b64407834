#include "rpwno/wno.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <type_traits>

#include "kernels.hpp"

namespace rpwno {

std::string to_string(Subband s) {
    switch (s) {
        case Subband::Approx: return "approx";
        case Subband::Detail: return "detail";
        case Subband::LL: return "LL";
        case Subband::LH: return "LH";
        case Subband::HL: return "HL";
        case Subband::HH: return "HH";
    }
    return "?";
}

Subband subband_from_string(std::string_view name) {
    for (auto s : {Subband::Approx, Subband::Detail, Subband::LL, Subband::LH, Subband::HL, Subband::HH})
        if (to_string(s) == name) return s;
    throw std::invalid_argument("unknown subband '" + std::string(name) + "'");
}

namespace {

bool is_2d_band(Subband s) { return s != Subband::Approx && s != Subband::Detail; }

Band axis_band(Subband s, std::size_t axis) {
    switch (s) {
        case Subband::Approx: return Band::Low;
        case Subband::Detail: return Band::High;
        case Subband::LL: return Band::Low;
        case Subband::HH: return Band::High;
        case Subband::LH: return axis == 0 ? Band::Low : Band::High;
        case Subband::HL: return axis == 0 ? Band::High : Band::Low;
    }
    return Band::Low;
}

std::size_t log2_floor(std::size_t n) {
    std::size_t l = 0;
    while (n > 1) {
        n /= 2;
        ++l;
    }
    return l;
}

}  // namespace

// ---- config -------------------------------------------------------------------

std::vector<std::size_t> WnoConfig::coarse_extents() const {
    std::vector<std::size_t> c;
    for (auto g : grid) c.push_back(g >> levels);
    return c;
}

std::size_t WnoConfig::coarse_size() const {
    std::size_t m = 1;
    for (auto c : coarse_extents()) m *= c;
    return m;
}

void validate(const WnoConfig& c) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid WnoConfig: " + msg); };
    if (c.spatial_dims != 1 && c.spatial_dims != 2) fail("spatial_dims must be 1 or 2");
    if (c.grid.size() != static_cast<std::size_t>(c.spatial_dims)) fail("grid needs one extent per spatial dimension");
    if (c.function_channels == 0) fail("function_channels must be >= 1");
    if (c.width <= c.in_channels())
        fail("width (" + std::to_string(c.width) + ") must exceed input channels (" + std::to_string(c.in_channels()) +
             ")");
    if (c.num_blocks == 0) fail("num_blocks must be >= 1");
    if (c.wavelet_order < kMinDaubechiesOrder || c.wavelet_order > kMaxDaubechiesOrder)
        fail("wavelet_order must be in 1..10");
    if (c.levels == 0) fail("levels must be >= 1");
    for (auto g : c.grid) {
        if (g % 2 != 0) fail("grid extent " + std::to_string(g) + " is odd");
        if (c.levels > max_levels(g))
            fail(std::to_string(c.levels) + " levels infeasible for grid extent " + std::to_string(g));
    }
    if (c.learned_subbands.empty()) fail("learned_subbands is empty");
    const Subband approx = c.spatial_dims == 1 ? Subband::Approx : Subband::LL;
    if (std::find(c.learned_subbands.begin(), c.learned_subbands.end(), approx) == c.learned_subbands.end())
        fail("learned_subbands must contain the approximation band");
    for (std::size_t i = 0; i < c.learned_subbands.size(); ++i) {
        const auto s = c.learned_subbands[i];
        if (is_2d_band(s) != (c.spatial_dims == 2)) fail("subband " + to_string(s) + " does not match dimension");
        for (std::size_t j = 0; j < i; ++j)
            if (c.learned_subbands[j] == s) fail("duplicate subband " + to_string(s));
    }
    if (c.proj_hidden == 0 || c.out_channels == 0) fail("projection sizes must be >= 1");
}

WnoConfig burgers_config(std::size_t grid) {
    WnoConfig c;
    c.spatial_dims = 1;
    c.grid = {grid};
    c.width = 64;
    c.num_blocks = 4;
    c.wavelet_order = 6;
    c.levels = std::min<std::size_t>(8, log2_floor(grid) > 2 ? log2_floor(grid) - 2 : 1);
    c.learned_subbands = {Subband::Approx, Subband::Detail};
    c.proj_hidden = 128;
    return c;
}

WnoConfig darcy_config(std::size_t grid) {
    WnoConfig c;
    c.spatial_dims = 2;
    c.grid = {grid, grid};
    c.width = 64;
    c.num_blocks = 4;
    c.wavelet_order = 6;
    c.levels = std::min<std::size_t>(4, log2_floor(grid) > 2 ? log2_floor(grid) - 2 : 1);
    c.learned_subbands = {Subband::LL, Subband::HL};
    c.proj_hidden = 192;
    return c;
}

std::size_t parameter_count(const WnoConfig& c) {
    const std::size_t p = c.width, h = c.proj_hidden;
    const std::size_t lift = c.in_channels() * p + p;
    const std::size_t block = c.learned_subbands.size() * p * p * c.coarse_size() + p * p + p;
    const std::size_t head = p * h + h + h * c.out_channels + c.out_channels;
    return lift + c.num_blocks * block + head;
}

// ---- wavelet basis ------------------------------------------------------------

WaveletBasis::WaveletBasis(const WaveletFilter& filter, std::vector<std::size_t> grid, std::size_t levels)
    : grid_(std::move(grid)), levels_(levels) {
    if (grid_.empty() || grid_.size() > 2) throw std::invalid_argument("WaveletBasis: 1 or 2 spatial axes");
    for (auto n : grid_) {
        low_.push_back(final_level_analysis(filter, n, levels, Band::Low));
        high_.push_back(final_level_analysis(filter, n, levels, Band::High));
    }
}

std::size_t WaveletBasis::grid_size() const {
    std::size_t n = 1;
    for (auto g : grid_) n *= g;
    return n;
}

std::size_t WaveletBasis::coarse_size() const {
    std::size_t n = 1;
    for (auto g : grid_) n *= g >> levels_;
    return n;
}

const Tensor& WaveletBasis::axis_operator(std::size_t axis, Band band) const {
    return band == Band::Low ? low_.at(axis) : high_.at(axis);
}

void WaveletBasis::analyze(const double* x, std::size_t p, Subband band, double* coef) const {
    using kernels::cmat;
    using kernels::mat;
    if (dims() == 1) {
        const Tensor& a = axis_operator(0, axis_band(band, 0));
        const std::size_t m = a.extent(0), n = a.extent(1);
        mat(coef, m, p).noalias() = cmat(a.data(), m, n) * cmat(x, n, p);
        return;
    }
    const Tensor& a0 = axis_operator(0, axis_band(band, 0));
    const Tensor& a1 = axis_operator(1, axis_band(band, 1));
    const std::size_t r = a0.extent(1), rc = a0.extent(0), c = a1.extent(1), cc = a1.extent(0);
    std::vector<double> t(r * cc * p);
    for (std::size_t u = 0; u < r; ++u)
        mat(t.data() + u * cc * p, cc, p).noalias() = cmat(a1.data(), cc, c) * cmat(x + u * c * p, c, p);
    mat(coef, rc, cc * p).noalias() = cmat(a0.data(), rc, r) * cmat(t.data(), r, cc * p);
}

void WaveletBasis::synthesize_add(const double* coef, std::size_t p, Subband band, double* out) const {
    using kernels::cmat;
    using kernels::mat;
    if (dims() == 1) {
        const Tensor& a = axis_operator(0, axis_band(band, 0));
        const std::size_t m = a.extent(0), n = a.extent(1);
        mat(out, n, p).noalias() += cmat(a.data(), m, n).transpose() * cmat(coef, m, p);
        return;
    }
    const Tensor& a0 = axis_operator(0, axis_band(band, 0));
    const Tensor& a1 = axis_operator(1, axis_band(band, 1));
    const std::size_t r = a0.extent(1), rc = a0.extent(0), c = a1.extent(1), cc = a1.extent(0);
    std::vector<double> u(r * cc * p);
    mat(u.data(), r, cc * p).noalias() = cmat(a0.data(), rc, r).transpose() * cmat(coef, rc, cc * p);
    for (std::size_t row = 0; row < r; ++row)
        mat(out + row * c * p, c, p).noalias() +=
            cmat(a1.data(), cc, c).transpose() * cmat(u.data() + row * cc * p, cc, p);
}

// ---- model --------------------------------------------------------------------

namespace {

Parameter uniform_parameter(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = dist(rng);
    return Parameter(std::move(name), std::move(t));
}

}  // namespace

WnoModel::WnoModel(WnoConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
    validate(config_);
    basis_ = std::make_shared<const WaveletBasis>(daubechies_filters(config_.wavelet_order), config_.grid,
                                                  config_.levels);
    std::mt19937_64 rng(seed);
    const std::size_t p = config_.width, in = config_.in_channels(), h = config_.proj_hidden;
    lift_weight = uniform_parameter("lift.weight", {in, p}, in, rng);
    lift_bias = uniform_parameter("lift.bias", {p}, in, rng);
    Shape sub_shape{p, p};
    for (auto e : config_.coarse_extents()) sub_shape.push_back(e);
    for (std::size_t b = 0; b < config_.num_blocks; ++b) {
        WaveletBlock blk;
        const std::string prefix = "block" + std::to_string(b) + ".";
        for (auto s : config_.learned_subbands)
            blk.subband_weights.push_back(uniform_parameter(prefix + "wavelet." + to_string(s), sub_shape, p, rng));
        blk.conv_weight = uniform_parameter(prefix + "conv.weight", {p, p}, p, rng);
        blk.conv_bias = uniform_parameter(prefix + "conv.bias", {p}, p, rng);
        blocks.push_back(std::move(blk));
    }
    proj_hidden_weight = uniform_parameter("proj.hidden.weight", {p, h}, p, rng);
    proj_hidden_bias = uniform_parameter("proj.hidden.bias", {h}, p, rng);
    proj_out_weight = uniform_parameter("proj.out.weight", {h, config_.out_channels}, h, rng);
    proj_out_bias = uniform_parameter("proj.out.bias", {config_.out_channels}, h, rng);
}

std::vector<Parameter*> WnoModel::parameters() {
    std::vector<Parameter*> out{&lift_weight, &lift_bias};
    for (auto& b : blocks) {
        for (auto& w : b.subband_weights) out.push_back(&w);
        out.push_back(&b.conv_weight);
        out.push_back(&b.conv_bias);
    }
    for (auto* p : {&proj_hidden_weight, &proj_hidden_bias, &proj_out_weight, &proj_out_bias}) out.push_back(p);
    return out;
}

std::vector<const Parameter*> WnoModel::parameters() const {
    auto ps = const_cast<WnoModel*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

void WnoModel::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

std::uint64_t parameter_checksum(const WnoModel& model) {
    std::uint64_t h = 0;
    for (const auto* p : model.parameters()) h = checksum_combine(h, checksum(p->value));
    return h;
}

// ---- wavelet mixing op ----------------------------------------------------------

Var wavelet_mix(Var x, const std::vector<Var>& weights, const WaveletBasis& basis, const std::vector<Subband>& bands) {
    const Tensor& xv = x.value();
    const std::size_t n = basis.grid_size(), m = basis.coarse_size();
    if (xv.rank() != basis.dims() + 2 || xv.numel() % n != 0 ||
        !std::equal(basis.grid().begin(), basis.grid().end(), xv.shape().begin() + 1))
        throw std::invalid_argument("wavelet_mix: input " + shape_str(xv.shape()) + " does not match grid " +
                                    shape_str(basis.grid()));
    if (weights.size() != bands.size()) throw std::invalid_argument("wavelet_mix: one weight per subband required");
    const std::size_t samples = xv.extent(0), p = xv.shape().back();
    for (const auto& w : weights)
        if (w.value().numel() != p * p * m || w.value().extent(0) != p)
            throw std::invalid_argument("wavelet_mix: subband weight " + shape_str(w.value().shape()) +
                                        " does not match width " + std::to_string(p) + " and coarse size " +
                                        std::to_string(m));

    // Location-major copies W_t[loc][k][o] of W[k][o][loc].
    auto transpose_weights = [p, m](const Tensor& w) {
        std::vector<double> t(m * p * p);
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t o = 0; o < p; ++o)
                for (std::size_t l = 0; l < m; ++l) t[(l * p + k) * p + o] = w[(k * p + o) * m + l];
        return t;
    };
    auto wts = std::make_shared<std::vector<std::vector<double>>>();
    for (const auto& w : weights) wts->push_back(transpose_weights(w.value()));

    const std::size_t nb = bands.size(), sample_len = n * p, coef_len = m * p;
    auto coefs = std::make_shared<std::vector<double>>(samples * nb * coef_len);
    Tensor out = xv;
    std::vector<double> delta(coef_len);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t b = 0; b < nb; ++b) {
            double* c = coefs->data() + (s * nb + b) * coef_len;
            basis.analyze(xv.data() + s * sample_len, p, bands[b], c);
            const auto& wt = (*wts)[b];
            for (std::size_t l = 0; l < m; ++l) {
                const double* cl = c + l * p;
                double* dl = delta.data() + l * p;
                for (std::size_t o = 0; o < p; ++o) dl[o] = -cl[o];
                for (std::size_t k = 0; k < p; ++k) {
                    const double ck = cl[k];
                    const double* wrow = wt.data() + (l * p + k) * p;
                    for (std::size_t o = 0; o < p; ++o) dl[o] += ck * wrow[o];
                }
            }
            basis.synthesize_add(delta.data(), p, bands[b], out.data() + s * sample_len);
        }
    }

    std::vector<std::size_t> wid;
    for (const auto& w : weights) wid.push_back(w.id());
    std::vector<Var> inputs{x};
    inputs.insert(inputs.end(), weights.begin(), weights.end());
    const auto ix = x.id();
    const WaveletBasis* bp = &basis;
    return x.tape()->record(std::move(out), inputs, [=, bands = bands](Tape& t, const Tensor& g) {
        const bool need_x = t.requires_grad(ix);
        std::vector<std::vector<double>> dwt(nb);
        for (std::size_t b = 0; b < nb; ++b)
            if (t.requires_grad(wid[b])) dwt[b].assign(m * p * p, 0.0);
        std::vector<double> ga(coef_len), dc(coef_len);
        Tensor* dx = need_x ? &t.grad_buffer(ix) : nullptr;
        if (dx)
            for (std::size_t i = 0; i < dx->numel(); ++i) (*dx)[i] += g[i];
        for (std::size_t s = 0; s < samples; ++s) {
            for (std::size_t b = 0; b < nb; ++b) {
                bp->analyze(g.data() + s * sample_len, p, bands[b], ga.data());
                const double* c = coefs->data() + (s * nb + b) * coef_len;
                const auto& wt = (*wts)[b];
                if (!dwt[b].empty()) {
                    auto& dw = dwt[b];
                    for (std::size_t l = 0; l < m; ++l)
                        for (std::size_t k = 0; k < p; ++k) {
                            const double ck = c[l * p + k];
                            double* drow = dw.data() + (l * p + k) * p;
                            const double* gl = ga.data() + l * p;
                            for (std::size_t o = 0; o < p; ++o) drow[o] += ck * gl[o];
                        }
                }
                if (dx) {
                    for (std::size_t l = 0; l < m; ++l) {
                        const double* gl = ga.data() + l * p;
                        for (std::size_t k = 0; k < p; ++k) {
                            const double* wrow = wt.data() + (l * p + k) * p;
                            double acc = -gl[k];
                            for (std::size_t o = 0; o < p; ++o) acc += wrow[o] * gl[o];
                            dc[l * p + k] = acc;
                        }
                    }
                    bp->synthesize_add(dc.data(), p, bands[b], dx->data() + s * sample_len);
                }
            }
        }
        for (std::size_t b = 0; b < nb; ++b) {
            if (dwt[b].empty()) continue;
            auto& dw = t.grad_buffer(wid[b]);
            for (std::size_t k = 0; k < p; ++k)
                for (std::size_t o = 0; o < p; ++o)
                    for (std::size_t l = 0; l < m; ++l) dw[(k * p + o) * m + l] += dwt[b][(l * p + k) * p + o];
        }
    });
}

// ---- forward pieces -------------------------------------------------------------

namespace {

template <class P>
Var bind(Tape& tape, P& p) {
    if constexpr (std::is_const_v<P>)
        return tape.constant_ref(p.value);
    else
        return tape.parameter(p);
}

void require_channels(const Tensor& x, std::size_t expected, const char* what) {
    if (x.rank() < 2 || x.shape().back() != expected)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) +
                                    " channels, got shape " + shape_str(x.shape()));
}

}  // namespace

template <class Model>
Var lift(Tape& tape, Var input, Model& model) {
    const auto& c = model.config();
    require_channels(input.value(), c.in_channels(), "lift");
    if (input.value().rank() != c.grid.size() + 2 ||
        !std::equal(c.grid.begin(), c.grid.end(), input.value().shape().begin() + 1))
        throw std::invalid_argument("lift: input " + shape_str(input.value().shape()) + " does not match grid " +
                                    shape_str(c.grid));
    return dense(input, bind(tape, model.lift_weight), bind(tape, model.lift_bias));
}

template <class Block>
Var wmc_forward(Tape& tape, Var x, Block& block, const WaveletBasis& basis, const std::vector<Subband>& bands) {
    std::vector<Var> w;
    for (auto& p : block.subband_weights) w.push_back(bind(tape, p));
    return wavelet_mix(x, w, basis, bands);
}

template <class Block>
Var cmc_forward(Tape& tape, Var x, Block& block) {
    require_channels(x.value(), block.conv_weight.value.extent(0), "cmc_forward");
    return conv1x1(x, bind(tape, block.conv_weight), bind(tape, block.conv_bias));
}

template <class Block>
Var block_forward(Tape& tape, Var x, Block& block, const WaveletBasis& basis, const std::vector<Subband>& bands,
                  bool apply_activation) {
    Var y = add(wmc_forward(tape, x, block, basis, bands), cmc_forward(tape, x, block));
    return apply_activation ? gelu(y) : y;
}

template <class Model>
Var project(Tape& tape, Var x, Model& model) {
    require_channels(x.value(), model.config().width, "project");
    Var h = gelu(dense(x, bind(tape, model.proj_hidden_weight), bind(tape, model.proj_hidden_bias)));
    return dense(h, bind(tape, model.proj_out_weight), bind(tape, model.proj_out_bias));
}

template <class Model>
Var wno_forward(Tape& tape, Var input, Model& model) {
    Var x = lift(tape, input, model);
    const auto& bands = model.config().learned_subbands;
    for (std::size_t b = 0; b < model.blocks.size(); ++b)
        x = block_forward(tape, x, model.blocks[b], model.basis(), bands, b + 1 < model.blocks.size());
    return project(tape, x, model);
}

template Var lift<WnoModel>(Tape&, Var, WnoModel&);
template Var lift<const WnoModel>(Tape&, Var, const WnoModel&);
template Var wmc_forward<WaveletBlock>(Tape&, Var, WaveletBlock&, const WaveletBasis&, const std::vector<Subband>&);
template Var wmc_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&, const WaveletBasis&,
                                             const std::vector<Subband>&);
template Var cmc_forward<WaveletBlock>(Tape&, Var, WaveletBlock&);
template Var cmc_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&);
template Var block_forward<WaveletBlock>(Tape&, Var, WaveletBlock&, const WaveletBasis&, const std::vector<Subband>&,
                                         bool);
template Var block_forward<const WaveletBlock>(Tape&, Var, const WaveletBlock&, const WaveletBasis&,
                                               const std::vector<Subband>&, bool);
template Var project<WnoModel>(Tape&, Var, WnoModel&);
template Var project<const WnoModel>(Tape&, Var, const WnoModel&);
template Var wno_forward<WnoModel>(Tape&, Var, WnoModel&);
template Var wno_forward<const WnoModel>(Tape&, Var, const WnoModel&);

Tensor wno_predict(const WnoModel& model, const Tensor& input, std::size_t chunk) {
    if (input.rank() == 0) throw std::invalid_argument("wno_predict: input needs a batch axis");
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t samples = input.extent(0);
    Tensor out;
    for (std::size_t s = 0; s < samples; s += chunk) {
        const std::size_t cnt = std::min(chunk, samples - s);
        Tape tape;
        Var y = wno_forward(tape, tape.constant(input.slice(s, cnt)), model);
        const Tensor& yv = y.value();
        if (s == 0) {
            Shape shp = yv.shape();
            shp[0] = samples;
            out = Tensor(shp);
        }
        std::copy(yv.values().begin(), yv.values().end(), out.data() + s * yv.sample_size());
    }
    return out;
}

}  // namespace rpwno
