#include "rpwno/wavelet.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace rpwno {

namespace {

// Minimum-phase Daubechies scaling filters, normalized to sum sqrt(2).
const std::vector<std::vector<double>> kDaubechiesLowpass = {
    // db1
    {0.707106781186547524401,
     0.707106781186547524401},
    // db2
    {0.482962913144534143375,
     0.836516303737807905575,
     0.224143868042013381026,
     -0.129409522551260381174},
    // db3
    {0.332670552950082615999,
     0.806891509311092576494,
     0.459877502118491570095,
     -0.135011020010254588696,
     -0.0854412738820266616928,
     0.0352262918857095366027},
    // db4
    {0.230377813308896500863,
     0.714846570552915647090,
     0.630880767929858907882,
     -0.0279837694168598542114,
     -0.187034811719093084080,
     0.0308413818355607636272,
     0.0328830116668851997354,
     -0.0105974017850690321049},
    // db5
    {0.160102397974192914481,
     0.603829269797189670540,
     0.724308528437772927728,
     0.138428145901320731505,
     -0.242294887066382031863,
     -0.0322448695846383746485,
     0.0775714938400457135231,
     -0.00624149021279827427419,
     -0.0125807519990819994685,
     0.00333572528547377127800},
    // db6
    {0.111540743350109463621,
     0.494623890398453085677,
     0.751133908021095350679,
     0.315250351709197629086,
     -0.226264693965439820076,
     -0.129766867567261935562,
     0.0975016055873230491023,
     0.0275228655303057286255,
     -0.0315820393174860295651,
     0.000553842201161496139252,
     0.00477725751094551063964,
     -0.00107730108530847956485},
    // db7
    {0.0778520540850091790200,
     0.396539319481917306539,
     0.729132090846235119917,
     0.469782287405193122472,
     -0.143906003928564975405,
     -0.224036184993874982638,
     0.0713092192668302647509,
     0.0806126091510830719129,
     -0.0380299369350144135796,
     -0.0165745416306668806541,
     0.0125509985560998406130,
     0.000429577972921366521132,
     -0.00180164070404749091527,
     0.000353713799974520248446},
    // db8
    {0.0544158422431040099550,
     0.312871590914299970659,
     0.675630736297289806808,
     0.585354683654206712771,
     -0.0158291052563493056674,
     -0.284015542961546926516,
     0.000472484573913282770361,
     0.128747426620478458857,
     -0.0173693010018075461696,
     -0.0440882539307947515068,
     0.0139810279173982816487,
     0.00874609404740577671638,
     -0.00487035299345157431042,
     -0.000391740373376947046298,
     0.000675449406450569366370,
     -0.000117476784124769533731},
    // db9
    {0.0380779473638783465887,
     0.243834674612590353732,
     0.604823123690111111903,
     0.657288078051300538078,
     0.133197385825007576191,
     -0.293273783279174908806,
     -0.0968407832229764605135,
     0.148540749338106380135,
     0.0307256814793333792123,
     -0.0676328290613299736756,
     0.000250947114831451957587,
     0.0223616621236790972054,
     -0.00472320475775139727793,
     -0.00428150368246342983450,
     0.00184764688305622647662,
     0.000230385763523195967205,
     -0.000251963188942710136975,
     0.0000393473203162715994807},
    // db10
    {0.0266700579005555535866,
     0.188176800077691489021,
     0.527201188931725586482,
     0.688459039453603565742,
     0.281172343660577460749,
     -0.249846424327315379416,
     -0.195946274377377043504,
     0.127369340335793260083,
     0.0930573646035723511604,
     -0.0713941471663970871453,
     -0.0294575368218758128583,
     0.0332126740593410017398,
     0.00360655356695616965542,
     -0.0107331754833305750443,
     0.00139535174705290116579,
     0.00199240529518505611716,
     -0.000685856694959711626561,
     -0.000116466855129285450951,
     0.0000935886703200695913341,
     -0.0000132642028945212448124},
};

void require_levels(std::size_t n, std::size_t levels, const char* what) {
    if (levels == 0) throw std::invalid_argument(std::string(what) + ": levels must be >= 1");
    if (levels > max_levels(n))
        throw std::invalid_argument(std::string(what) + ": too many levels (" + std::to_string(levels) +
                                    ") for length " + std::to_string(n) + "; at most " +
                                    std::to_string(max_levels(n)) + " keep every level even");
}

// One periodized analysis step over `n` samples spaced `stride` apart.
void analyze(const double* x, std::size_t n, std::size_t stride, const WaveletFilter& f, double* lo,
             double* hi, std::size_t out_stride) {
    const std::size_t half = n / 2, taps = f.length();
    for (std::size_t i = 0; i < half; ++i) {
        double a = 0.0, d = 0.0;
        for (std::size_t k = 0; k < taps; ++k) {
            const double v = x[((2 * i + k) % n) * stride];
            a += f.dec_lo[k] * v;
            d += f.dec_hi[k] * v;
        }
        lo[i * out_stride] = a;
        hi[i * out_stride] = d;
    }
}

// Adjoint of analyze; overwrites the n outputs.
void synthesize(const double* lo, const double* hi, std::size_t in_stride, std::size_t n, const WaveletFilter& f,
                double* x, std::size_t stride) {
    const std::size_t half = n / 2, taps = f.length();
    for (std::size_t j = 0; j < n; ++j) x[j * stride] = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        const double a = lo[i * in_stride], d = hi[i * in_stride];
        for (std::size_t k = 0; k < taps; ++k) x[((2 * i + k) % n) * stride] += f.dec_lo[k] * a + f.dec_hi[k] * d;
    }
}

Shape with_last(Shape s, std::size_t n) {
    s.back() = n;
    return s;
}

Shape with_last2(Shape s, std::size_t r, std::size_t c) {
    s[s.size() - 2] = r;
    s.back() = c;
    return s;
}

}  // namespace

WaveletFilter daubechies_filters(int order) {
    if (order < kMinDaubechiesOrder || order > kMaxDaubechiesOrder)
        throw std::invalid_argument("unsupported Daubechies order " + std::to_string(order) + " (supported 1.." +
                                    std::to_string(kMaxDaubechiesOrder) + ")");
    WaveletFilter f;
    f.order = order;
    f.dec_lo = kDaubechiesLowpass[static_cast<std::size_t>(order - 1)];
    const std::size_t len = f.dec_lo.size();
    f.dec_hi.resize(len);
    for (std::size_t k = 0; k < len; ++k) f.dec_hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * f.dec_lo[len - 1 - k];
    f.rec_lo.assign(f.dec_lo.rbegin(), f.dec_lo.rend());
    f.rec_hi.assign(f.dec_hi.rbegin(), f.dec_hi.rend());
    return f;
}

std::size_t max_levels(std::size_t n) {
    std::size_t l = 0;
    while (n >= 2 && n % 2 == 0) {
        n /= 2;
        ++l;
    }
    return l;
}

Dwt1dCoeffs dwt1d(const Tensor& x, const WaveletFilter& filter, std::size_t levels) {
    if (x.rank() == 0) throw std::invalid_argument("dwt1d: input must have at least one axis");
    const std::size_t n = x.shape().back();
    require_levels(n, levels, "dwt1d");
    const std::size_t batch = x.numel() / n;

    Dwt1dCoeffs c;
    c.levels = levels;
    c.original_length = n;
    Tensor current = x;
    std::size_t len = n;
    for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t half = len / 2;
        Tensor lo(with_last(x.shape(), half)), hi(with_last(x.shape(), half));
        for (std::size_t b = 0; b < batch; ++b)
            analyze(current.data() + b * len, len, 1, filter, lo.data() + b * half, hi.data() + b * half, 1);
        c.details.push_back(std::move(hi));
        current = std::move(lo);
        len = half;
    }
    c.approx = std::move(current);
    return c;
}

Tensor idwt1d(const Dwt1dCoeffs& c, const WaveletFilter& filter) {
    if (c.details.size() != c.levels || c.levels == 0)
        throw std::invalid_argument("idwt1d: expected " + std::to_string(c.levels) + " detail levels, got " +
                                    std::to_string(c.details.size()));
    require_levels(c.original_length, c.levels, "idwt1d");
    Tensor current = c.approx;
    std::size_t len = c.original_length >> c.levels;
    for (std::size_t l = c.levels; l-- > 0;) {
        const Tensor& hi = c.details[l];
        if (current.shape().back() != len || !hi.same_shape(current))
            throw std::invalid_argument("idwt1d: inconsistent coefficient extents at level " + std::to_string(l + 1) +
                                        ": approx " + shape_str(current.shape()) + ", detail " +
                                        shape_str(hi.shape()) + ", expected length " + std::to_string(len));
        const std::size_t batch = current.numel() / len;
        Tensor up(with_last(current.shape(), 2 * len));
        for (std::size_t b = 0; b < batch; ++b)
            synthesize(current.data() + b * len, hi.data() + b * len, 1, 2 * len, filter, up.data() + b * 2 * len, 1);
        current = std::move(up);
        len *= 2;
    }
    return current;
}

Dwt2dCoeffs dwt2d(const Tensor& x, const WaveletFilter& filter, std::size_t levels) {
    if (x.rank() < 2) throw std::invalid_argument("dwt2d: input must have at least two axes");
    const std::size_t rows = x.extent(x.rank() - 2), cols = x.shape().back();
    require_levels(rows, levels, "dwt2d (rows)");
    require_levels(cols, levels, "dwt2d (cols)");
    const std::size_t batch = x.numel() / (rows * cols);

    Dwt2dCoeffs c;
    c.levels = levels;
    c.rows = rows;
    c.cols = cols;
    Tensor current = x;
    std::size_t r = rows, w = cols;
    std::vector<double> l1, h1;
    for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t hr = r / 2, hw = w / 2;
        Shape s = with_last2(x.shape(), hr, hw);
        Tensor ll(s), lh(s), hl(s), hh(s);
        l1.assign(r * hw, 0.0);
        h1.assign(r * hw, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = current.data() + b * r * w;
            for (std::size_t u = 0; u < r; ++u) analyze(src + u * w, w, 1, filter, &l1[u * hw], &h1[u * hw], 1);
            const std::size_t o = b * hr * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                analyze(&l1[j], r, hw, filter, ll.data() + o + j, hl.data() + o + j, hw);
                analyze(&h1[j], r, hw, filter, lh.data() + o + j, hh.data() + o + j, hw);
            }
        }
        c.details.push_back({std::move(lh), std::move(hl), std::move(hh)});
        current = std::move(ll);
        r = hr;
        w = hw;
    }
    c.approx = std::move(current);
    return c;
}

Tensor idwt2d(const Dwt2dCoeffs& c, const WaveletFilter& filter) {
    if (c.details.size() != c.levels || c.levels == 0)
        throw std::invalid_argument("idwt2d: expected " + std::to_string(c.levels) + " detail levels, got " +
                                    std::to_string(c.details.size()));
    require_levels(c.rows, c.levels, "idwt2d (rows)");
    require_levels(c.cols, c.levels, "idwt2d (cols)");
    Tensor current = c.approx;
    std::size_t hr = c.rows >> c.levels, hw = c.cols >> c.levels;
    std::vector<double> l1, h1;
    for (std::size_t l = c.levels; l-- > 0;) {
        const auto& d = c.details[l];
        const Shape expect = current.shape();
        if (current.rank() < 2 || current.extent(current.rank() - 2) != hr || current.shape().back() != hw ||
            d.lh.shape() != expect || d.hl.shape() != expect || d.hh.shape() != expect)
            throw std::invalid_argument("idwt2d: inconsistent coefficient extents at level " + std::to_string(l + 1));
        const std::size_t r = 2 * hr, w = 2 * hw;
        const std::size_t batch = current.numel() / (hr * hw);
        Tensor up(with_last2(current.shape(), r, w));
        l1.assign(r * hw, 0.0);
        h1.assign(r * hw, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t o = b * hr * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                synthesize(current.data() + o + j, d.hl.data() + o + j, hw, r, filter, &l1[j], hw);
                synthesize(d.lh.data() + o + j, d.hh.data() + o + j, hw, r, filter, &h1[j], hw);
            }
            double* dst = up.data() + b * r * w;
            for (std::size_t u = 0; u < r; ++u) synthesize(&l1[u * hw], &h1[u * hw], 1, w, filter, dst + u * w, 1);
        }
        current = std::move(up);
        hr = r;
        hw = w;
    }
    return current;
}

Tensor final_level_analysis(const WaveletFilter& filter, std::size_t n, std::size_t levels, Band band) {
    require_levels(n, levels, "final_level_analysis");
    Tensor eye({n, n});
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    auto c = dwt1d(eye, filter, levels);
    const Tensor& coef = band == Band::Low ? c.approx : c.details.back();  // [n unit vectors, m]
    const std::size_t m = n >> levels;
    Tensor a({m, n});
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) a[i * n + j] = coef[j * m + i];
    return a;
}

}  // namespace rpwno
