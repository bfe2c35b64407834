#include "rpwno/container.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace rpwno {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw std::runtime_error(path.string() + ": truncated container");
    return v;
}

Tensor coords_tensor(const std::vector<double>& c) { return Tensor({c.size()}, c); }

void add_model(Container& c, const std::string& prefix, const WnoModel& m) {
    for (const auto* p : m.parameters()) c.tensors.push_back({prefix + p->name, p->value});
}

void load_model(const Container& c, const std::string& prefix, WnoModel& m) {
    for (auto* p : m.parameters()) {
        const Tensor& t = c.get(prefix + p->name);
        if (!t.same_shape(p->value))
            throw std::runtime_error("checkpoint tensor " + prefix + p->name + " has shape " + shape_str(t.shape()) +
                                     ", expected " + shape_str(p->value.shape()));
        p->value = t;
        p->zero_grad();
    }
}

}  // namespace

const Tensor& Container::get(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t.value;
    throw std::runtime_error("container has no tensor named '" + name + "'");
}

bool Container::has(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return true;
    return false;
}

void write_container(const std::filesystem::path& path, const Container& c) {
    if (c.magic.size() != 4) throw std::invalid_argument("container magic must be 4 bytes");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(c.magic.data(), 4);
    put<std::uint32_t>(os, c.version);
    const std::string meta = c.metadata.dump();
    put<std::uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    for (const auto& t : c.tensors) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rank()));
        for (auto e : t.value.shape()) put<std::uint64_t>(os, e);
        os.write(reinterpret_cast<const char*>(t.value.data()),
                 static_cast<std::streamsize>(t.value.numel() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Container read_container(const std::filesystem::path& path, const std::string& expected_magic) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    Container c;
    c.magic.resize(4);
    if (!is.read(c.magic.data(), 4)) throw std::runtime_error(path.string() + ": truncated container");
    if (c.magic != expected_magic)
        throw std::runtime_error(path.string() + ": expected magic " + expected_magic + ", found '" + c.magic + "'");
    c.version = get<std::uint32_t>(is, path);
    if (c.version != kContainerVersion)
        throw std::runtime_error(path.string() + ": unsupported version " + std::to_string(c.version));
    const auto meta_len = get<std::uint64_t>(is, path);
    std::string meta(meta_len, '\0');
    if (!is.read(meta.data(), static_cast<std::streamsize>(meta_len)))
        throw std::runtime_error(path.string() + ": truncated metadata");
    c.metadata = nlohmann::json::parse(meta);
    while (is.peek() != std::char_traits<char>::eof()) {
        NamedTensor t;
        t.name.resize(get<std::uint32_t>(is, path));
        if (!is.read(t.name.data(), static_cast<std::streamsize>(t.name.size())))
            throw std::runtime_error(path.string() + ": truncated tensor name");
        const auto rank = get<std::uint32_t>(is, path);
        Shape shape(rank);
        for (auto& e : shape) e = get<std::uint64_t>(is, path);
        Tensor v(shape);
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.numel() * sizeof(double))))
            throw std::runtime_error(path.string() + ": truncated payload for " + t.name);
        t.value = std::move(v);
        c.tensors.push_back(std::move(t));
    }
    return c;
}

nlohmann::json to_json(const WnoConfig& c) {
    std::vector<std::string> bands;
    for (auto b : c.learned_subbands) bands.push_back(to_string(b));
    return {{"spatial_dims", c.spatial_dims},   {"grid", c.grid},
            {"function_channels", c.function_channels}, {"width", c.width},
            {"num_blocks", c.num_blocks},       {"wavelet_order", c.wavelet_order},
            {"levels", c.levels},               {"learned_subbands", bands},
            {"proj_hidden", c.proj_hidden},     {"out_channels", c.out_channels}};
}

WnoConfig wno_config_from_json(const nlohmann::json& j) {
    WnoConfig c;
    c.spatial_dims = j.at("spatial_dims").get<int>();
    c.grid = j.at("grid").get<std::vector<std::size_t>>();
    c.function_channels = j.at("function_channels").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.num_blocks = j.at("num_blocks").get<std::size_t>();
    c.wavelet_order = j.at("wavelet_order").get<int>();
    c.levels = j.at("levels").get<std::size_t>();
    for (const auto& b : j.at("learned_subbands")) c.learned_subbands.push_back(subband_from_string(b.get<std::string>()));
    c.proj_hidden = j.at("proj_hidden").get<std::size_t>();
    c.out_channels = j.at("out_channels").get<std::size_t>();
    validate(c);
    return c;
}

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
    d.validate();
    Container c;
    c.magic = "RPWD";
    c.version = kContainerVersion;
    c.metadata = d.metadata;
    c.metadata["problem"] = to_string(d.problem);
    c.tensors.push_back({"inputs", d.inputs});
    c.tensors.push_back({"outputs", d.outputs});
    for (std::size_t a = 0; a < d.coords.size(); ++a) c.tensors.push_back({"coords." + std::to_string(a), coords_tensor(d.coords[a])});
    write_container(path, c);
}

Dataset load_dataset(const std::filesystem::path& path) {
    const Container c = read_container(path, "RPWD");
    Dataset d;
    d.problem = problem_from_string(c.metadata.at("problem").get<std::string>());
    d.metadata = c.metadata;
    d.inputs = c.get("inputs");
    d.outputs = c.get("outputs");
    for (std::size_t a = 0; c.has("coords." + std::to_string(a)); ++a) d.coords.push_back(c.get("coords." + std::to_string(a)).vec());
    d.validate();
    return d;
}

void save_checkpoint(const std::filesystem::path& path, const Ensemble& e, const nlohmann::json& extra) {
    Container c;
    c.magic = "RPWC";
    c.version = kContainerVersion;
    std::vector<std::uint64_t> seeds;
    for (const auto& m : e.members) seeds.push_back(m.seed);
    c.metadata = {{"config", to_json(e.config)}, {"beta", e.beta}, {"seeds", seeds}, {"members", e.members.size()}};
    if (!extra.is_null()) c.metadata["run"] = extra;
    for (std::size_t a = 0; a < e.coords.size(); ++a) c.tensors.push_back({"coords." + std::to_string(a), coords_tensor(e.coords[a])});
    if (!e.input_norm.empty()) {
        c.tensors.push_back({"norm.input.mean", e.input_norm.mean});
        c.tensors.push_back({"norm.input.std", e.input_norm.std});
    }
    if (!e.output_norm.empty()) {
        c.tensors.push_back({"norm.output.mean", e.output_norm.mean});
        c.tensors.push_back({"norm.output.std", e.output_norm.std});
    }
    for (std::size_t i = 0; i < e.members.size(); ++i) {
        const auto& m = e.members[i];
        const std::string p = "member" + std::to_string(i) + ".";
        add_model(c, p + "trainable.", m.trainable);
        add_model(c, p + "prior.", m.prior);
        c.tensors.push_back({p + "loss_history", Tensor({m.loss_history.size()}, m.loss_history)});
    }
    write_container(path, c);
}

Ensemble load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
    const Container c = read_container(path, "RPWC");
    const WnoConfig cfg = wno_config_from_json(c.metadata.at("config"));
    const double beta = c.metadata.at("beta").get<double>();
    const auto seeds = c.metadata.at("seeds").get<std::vector<std::uint64_t>>();
    std::vector<std::vector<double>> coords;
    for (std::size_t a = 0; a < cfg.grid.size(); ++a) coords.push_back(c.get("coords." + std::to_string(a)).vec());
    Ensemble e = make_ensemble(cfg, beta, seeds, std::move(coords), true);
    if (c.has("norm.input.mean")) e.input_norm = {c.get("norm.input.mean"), c.get("norm.input.std")};
    if (c.has("norm.output.mean")) e.output_norm = {c.get("norm.output.mean"), c.get("norm.output.std")};
    for (std::size_t i = 0; i < e.members.size(); ++i) {
        const std::string p = "member" + std::to_string(i) + ".";
        load_model(c, p + "trainable.", e.members[i].trainable);
        load_model(c, p + "prior.", e.members[i].prior);
        e.members[i].loss_history = c.get(p + "loss_history").vec();
    }
    if (metadata) *metadata = c.metadata;
    return e;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw std::invalid_argument("CSV row width does not match header");
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace rpwno
