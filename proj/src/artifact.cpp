#include "ggps/artifact.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace ggps {

namespace {

constexpr char kMagic[4] = {'G', 'G', 'P', 'S'};

// section tags, exactly four bytes each
constexpr char kTagMeta[4] = {'M', 'E', 'T', 'A'};
constexpr char kTagNorm[4] = {'N', 'O', 'R', 'M'};
constexpr char kTagQuad[4] = {'Q', 'U', 'A', 'D'};
constexpr char kTagPart[4] = {'P', 'A', 'R', 'T'};
constexpr char kTagBin[4] = {'B', 'I', 'N', '\0'};
constexpr char kTagEnd[4] = {'E', 'N', 'D', '\0'};

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("artifact: " + what);
}

// ---- serialization into an in-memory payload ----

class Payload {
  public:
    void put_u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void put_u32(std::uint32_t v) { put_raw(&v, sizeof v); }
    void put_u64(std::uint64_t v) { put_raw(&v, sizeof v); }
    void put_i32(std::int32_t v) { put_raw(&v, sizeof v); }
    void put_f64(double v) { put_raw(&v, sizeof v); }

    void put_string(const std::string& s) {
        put_u64(s.size());
        buf_.append(s);
    }
    void put_ints(const std::vector<int>& v) {
        put_u64(v.size());
        for (int x : v) put_i32(x);
    }
    void put_vec(const Eigen::VectorXd& v) {
        put_u64(static_cast<std::uint64_t>(v.size()));
        put_raw(v.data(), static_cast<size_t>(v.size()) * sizeof(double));
    }
    void put_mat(const Eigen::MatrixXd& m) {
        put_u64(static_cast<std::uint64_t>(m.rows()));
        put_u64(static_cast<std::uint64_t>(m.cols()));
        put_raw(m.data(), static_cast<size_t>(m.size()) * sizeof(double));
    }

    void write_section(std::ofstream& out, const char tag[4]) const {
        out.write(tag, 4);
        const std::uint64_t len = buf_.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    }

  private:
    void put_raw(const void* p, size_t n) {
        buf_.append(reinterpret_cast<const char*>(p), n);
    }
    std::string buf_;
};

// ---- deserialization from a section payload ----

class Reader {
  public:
    Reader(std::string buf, const char* section) : buf_(std::move(buf)), section_(section) {}

    std::uint8_t get_u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t get_u32() { return get_pod<std::uint32_t>(); }
    std::uint64_t get_u64() { return get_pod<std::uint64_t>(); }
    std::int32_t get_i32() { return get_pod<std::int32_t>(); }
    double get_f64() { return get_pod<double>(); }

    std::string get_string() {
        const std::uint64_t n = checked_count(get_u64(), 1);
        const char* p = take(static_cast<size_t>(n));
        return std::string(p, static_cast<size_t>(n));
    }
    std::vector<int> get_ints() {
        const std::uint64_t n = checked_count(get_u64(), sizeof(std::int32_t));
        std::vector<int> v(static_cast<size_t>(n));
        for (auto& x : v) x = get_i32();
        return v;
    }
    Eigen::VectorXd get_vec() {
        const std::uint64_t n = checked_count(get_u64(), sizeof(double));
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        std::memcpy(v.data(), take(static_cast<size_t>(n) * sizeof(double)),
                    static_cast<size_t>(n) * sizeof(double));
        return v;
    }
    Eigen::MatrixXd get_mat() {
        const std::uint64_t r = checked_count(get_u64(), 1);
        const std::uint64_t c = checked_count(get_u64(), 1);
        if (r * c * sizeof(double) > remaining())
            fail(std::string(section_) + " section: matrix larger than its section");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        const size_t bytes = static_cast<size_t>(r * c) * sizeof(double);
        std::memcpy(m.data(), take(bytes), bytes);
        return m;
    }

    void expect_exhausted() const {
        if (pos_ != buf_.size())
            fail(std::string(section_) + " section: trailing bytes");
    }

  private:
    template <typename T>
    T get_pod() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    const char* take(size_t n) {
        if (n > remaining())
            fail(std::string(section_) + " section: truncated");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t checked_count(std::uint64_t n, size_t elem_size) {
        if (n > remaining() / (elem_size ? elem_size : 1))
            fail(std::string(section_) + " section: implausible element count");
        return n;
    }
    size_t remaining() const { return buf_.size() - pos_; }

    std::string buf_;
    const char* section_;
    size_t pos_ = 0;
};

void build_meta_payload(Payload& p, const ArtifactMeta& meta) {
    p.put_u64(meta.seed);
    p.put_u8(meta.with_schur ? 1 : 0);
    p.put_f64(meta.eps);
    p.put_i32(meta.n_train);
    p.put_string(meta.oracle_version);
    p.put_ints(meta.grad_dims);
    p.put_f64(meta.kernel.sigma);
    p.put_f64(meta.kernel.length_scale);
    p.put_f64(meta.kernel.jitter);
    p.put_vec(meta.kernel.grad_noise);
}

void parse_meta_payload(Reader& r, ArtifactMeta& meta) {
    meta.seed = r.get_u64();
    meta.with_schur = r.get_u8() != 0;
    meta.eps = r.get_f64();
    meta.n_train = r.get_i32();
    meta.oracle_version = r.get_string();
    meta.grad_dims = r.get_ints();
    meta.kernel.sigma = r.get_f64();
    meta.kernel.length_scale = r.get_f64();
    meta.kernel.jitter = r.get_f64();
    meta.kernel.grad_noise = r.get_vec();
    r.expect_exhausted();
}

} // namespace

ArtifactWriter::ArtifactWriter(const std::string& path, const ArtifactMeta& meta)
    : out_(path, std::ios::binary), path_(path) {
    if (!out_) fail("cannot open for writing: " + path);
    if (meta.centroids.rows() < 1) throw std::invalid_argument("artifact: no partition cells");
    if (meta.stats.x_min.size() != meta.centroids.cols())
        throw std::invalid_argument("artifact: centroid dimension does not match input stats");
    meta.kernel.validate(static_cast<int>(meta.grad_dims.size()));
    bins_expected_ = static_cast<int>(meta.centroids.rows());

    out_.write(kMagic, 4);
    const std::uint32_t version = kArtifactVersion;
    out_.write(reinterpret_cast<const char*>(&version), sizeof version);

    Payload m;
    build_meta_payload(m, meta);
    m.write_section(out_, kTagMeta);

    Payload n;
    n.put_vec(meta.stats.x_min);
    n.put_vec(meta.stats.x_max);
    n.put_vec(meta.stats.y_mean);
    n.put_vec(meta.stats.y_var);
    n.put_vec(meta.stats.half_range);
    n.write_section(out_, kTagNorm);

    Payload q;
    q.put_f64(meta.quad.mass);
    q.put_f64(meta.quad.g);
    q.put_f64(meta.quad.l_x);
    q.put_f64(meta.quad.l_y);
    q.put_f64(meta.quad.hover_rpm);
    q.put_f64(meta.quad.p_f);
    q.put_f64(meta.quad.t_z);
    q.write_section(out_, kTagQuad);

    Payload part;
    part.put_u32(static_cast<std::uint32_t>(bins_expected_));
    part.put_mat(meta.centroids);
    part.write_section(out_, kTagPart);
    if (!out_) fail("write failed: " + path_);
}

ArtifactWriter::~ArtifactWriter() = default;

void ArtifactWriter::add_bin(const BinPrecomp& bin) {
    if (finished_) throw std::logic_error("artifact: add_bin after finish");
    if (bins_written_ >= bins_expected_)
        throw std::invalid_argument("artifact: more bins than partition cells");
    if (bin.S_inv.rows() != bin.S_inv.cols() || bin.W.rows() != bin.S_inv.rows())
        throw std::invalid_argument("artifact: inconsistent bin block shapes");

    Payload p;
    p.put_i32(bin.bin_id);
    p.put_i32(bin.solver_iterations);
    p.put_f64(bin.solver_residual);
    p.put_ints(bin.near_pt_idx);
    p.put_mat(bin.near_pts);
    p.put_mat(bin.S_inv);
    p.put_mat(bin.W);
    p.write_section(out_, kTagBin);
    if (!out_) fail("write failed: " + path_);
    ++bins_written_;
}

void ArtifactWriter::finish() {
    if (finished_) return;
    if (bins_written_ != bins_expected_) {
        std::ostringstream os;
        os << "artifact: wrote " << bins_written_ << " bins, partition has " << bins_expected_;
        throw std::invalid_argument(os.str());
    }
    Payload empty;
    empty.write_section(out_, kTagEnd);
    out_.flush();
    if (!out_) fail("write failed: " + path_);
    out_.close();
    finished_ = true;
}

void save_artifact(const std::string& path, const ArtifactMeta& meta,
                   const std::vector<BinPrecomp>& bins) {
    ArtifactWriter w(path, meta);
    for (const auto& b : bins) w.add_bin(b);
    w.finish();
}

void load_artifact_stream(const std::string& path, ArtifactMeta& meta,
                          const std::function<void(ArtifactBin&&)>& on_bin) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        fail("bad magic in " + path);
    std::uint32_t version = 0;
    if (!in.read(reinterpret_cast<char*>(&version), sizeof version))
        fail("truncated header in " + path);
    if (version != kArtifactVersion) {
        std::ostringstream os;
        os << "artifact: unsupported version " << version;
        throw std::invalid_argument(os.str());
    }

    bool saw_meta = false, saw_norm = false, saw_quad = false, saw_part = false;
    std::uint32_t bins_expected = 0;
    std::uint32_t bins_seen = 0;

    for (;;) {
        char tag[4];
        if (!in.read(tag, 4)) fail("missing END section (truncated file?): " + path);
        std::uint64_t len = 0;
        if (!in.read(reinterpret_cast<char*>(&len), sizeof len))
            fail("truncated section header: " + path);

        if (std::memcmp(tag, kTagEnd, 4) == 0) {
            if (len != 0) fail("END section carries a payload");
            break;
        }

        std::string payload(static_cast<size_t>(len), '\0');
        if (len > 0 && !in.read(payload.data(), static_cast<std::streamsize>(len)))
            fail("truncated section payload: " + path);

        if (std::memcmp(tag, kTagMeta, 4) == 0) {
            Reader r(std::move(payload), "META");
            parse_meta_payload(r, meta);
            saw_meta = true;
        } else if (std::memcmp(tag, kTagNorm, 4) == 0) {
            Reader r(std::move(payload), "NORM");
            meta.stats.x_min = r.get_vec();
            meta.stats.x_max = r.get_vec();
            meta.stats.y_mean = r.get_vec();
            meta.stats.y_var = r.get_vec();
            meta.stats.half_range = r.get_vec();
            r.expect_exhausted();
            saw_norm = true;
        } else if (std::memcmp(tag, kTagQuad, 4) == 0) {
            Reader r(std::move(payload), "QUAD");
            meta.quad.mass = r.get_f64();
            meta.quad.g = r.get_f64();
            meta.quad.l_x = r.get_f64();
            meta.quad.l_y = r.get_f64();
            meta.quad.hover_rpm = r.get_f64();
            meta.quad.p_f = r.get_f64();
            meta.quad.t_z = r.get_f64();
            r.expect_exhausted();
            saw_quad = true;
        } else if (std::memcmp(tag, kTagPart, 4) == 0) {
            Reader r(std::move(payload), "PART");
            bins_expected = r.get_u32();
            meta.centroids = r.get_mat();
            r.expect_exhausted();
            if (meta.centroids.rows() != static_cast<Eigen::Index>(bins_expected))
                fail("PART section: centroid count mismatch");
            saw_part = true;
        } else if (std::memcmp(tag, kTagBin, 4) == 0) {
            if (!(saw_meta && saw_norm && saw_quad && saw_part))
                fail("BIN section before metadata");
            Reader r(std::move(payload), "BIN");
            ArtifactBin b;
            b.id = r.get_i32();
            b.solver_iterations = r.get_i32();
            b.solver_residual = r.get_f64();
            b.near_pt_idx = r.get_ints();
            b.near_pts = r.get_mat();
            b.S_inv = r.get_mat();
            b.W = r.get_mat();
            r.expect_exhausted();
            if (b.S_inv.rows() != b.S_inv.cols() || b.W.rows() != b.S_inv.rows())
                fail("BIN section: inconsistent block shapes");
            if (b.near_pts.cols() != meta.stats.x_min.size())
                fail("BIN section: near-point dimension mismatch");
            ++bins_seen;
            on_bin(std::move(b));
        } else {
            std::ostringstream os;
            os << "artifact: unknown section tag 0x";
            for (char c : tag) os << std::hex << (static_cast<unsigned>(c) & 0xff);
            throw std::runtime_error(os.str());
        }
    }

    if (!(saw_meta && saw_norm && saw_quad && saw_part))
        fail("missing metadata sections: " + path);
    if (bins_seen != bins_expected) {
        std::ostringstream os;
        os << "artifact: file holds " << bins_seen << " bins, partition expects "
           << bins_expected;
        throw std::runtime_error(os.str());
    }
}

LoadedArtifact load_artifact(const std::string& path) {
    LoadedArtifact a;
    load_artifact_stream(path, a.meta, [&](ArtifactBin&& b) { a.bins.push_back(std::move(b)); });
    return a;
}

} // namespace ggps
