#include "hypermae/checkpoint.hpp"

#include "hypermae/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace hypermae {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'C', 'K'};

void put(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_tensor(std::vector<unsigned char>& out, const NamedTensor& t, const std::string& prefix) {
    const std::string name = prefix + t.name;
    if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name);
    put(out, name.size(), 2);
    out.insert(out.end(), name.begin(), name.end());
    put(out, t.dims.size(), 4);
    std::size_t count = 1;
    for (auto d : t.dims) {
        put(out, d, 4);
        count *= d;
    }
    if (count != t.data.size()) throw FormatError("tensor " + name + " data does not match its dims");
    for (float v : t.data) put(out, std::bit_cast<std::uint32_t>(v), 4);
}

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::uint64_t uint(int bytes, const char* what) {
        need(static_cast<std::size_t>(bytes), what);
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string text(std::size_t n) {
        need(n, "tensor name");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated checkpoint while reading ") + what);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    NamedTensor tensor() {
        NamedTensor t;
        t.name = text(static_cast<std::size_t>(uint(2, "name length")));
        const auto ndim = uint(4, "ndim");
        std::size_t count = 1;
        for (std::uint64_t i = 0; i < ndim; ++i) {
            t.dims.push_back(static_cast<std::uint32_t>(uint(4, "dims")));
            count *= t.dims.back();
        }
        need(count * 4, "tensor data");
        t.data.resize(count);
        for (auto& v : t.data) v = std::bit_cast<float>(static_cast<std::uint32_t>(uint(4, "tensor data")));
        return t;
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::string strip(const std::string& name, const std::string& prefix) {
    if (name.rfind(prefix, 0) != 0) throw FormatError("optimizer tensor " + name + " lacks the " + prefix + " prefix");
    return name.substr(prefix.size());
}

} // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put(out, ckpt.params.size(), 4);
    for (const auto& t : ckpt.params) put_tensor(out, t, "");
    put(out, ckpt.first_moments.size() + ckpt.second_moments.size(), 4);
    for (const auto& t : ckpt.first_moments) put_tensor(out, t, "m.");
    for (const auto& t : ckpt.second_moments) put_tensor(out, t, "v.");
    put(out, ckpt.step, 8);
    put(out, ckpt.seed, 8);
    return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic");
    Reader r(bytes.subspan(4));
    Checkpoint c;
    std::set<std::string> seen;
    const auto n = r.uint(4, "tensor count");
    for (std::uint64_t i = 0; i < n; ++i) {
        c.params.push_back(r.tensor());
        if (!seen.insert(c.params.back().name).second) throw FormatError("duplicate tensor " + c.params.back().name);
    }
    const auto k = r.uint(4, "optimizer tensor count");
    for (std::uint64_t i = 0; i < k; ++i) {
        NamedTensor t = r.tensor();
        if (!seen.insert(t.name).second) throw FormatError("duplicate tensor " + t.name);
        if (t.name.rfind("m.", 0) == 0) {
            if (!c.second_moments.empty()) throw FormatError("first moments must precede second moments");
            t.name = strip(t.name, "m.");
            c.first_moments.push_back(std::move(t));
        } else {
            t.name = strip(t.name, "v.");
            c.second_moments.push_back(std::move(t));
        }
    }
    c.step = r.uint(8, "step counter");
    c.seed = r.uint(8, "run seed");
    if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint footer");
    return c;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

} // namespace hypermae
