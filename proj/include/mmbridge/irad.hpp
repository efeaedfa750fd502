#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/fmcw.hpp"
#include "mmbridge/imu.hpp"
#include "mmbridge/kinematics.hpp"
#include "mmbridge/types.hpp"

// IRAD container: a fixed little-endian binary layout shared by every
// artifact the pipeline produces.
//
//   bytes 0-3   magic "IRAD"
//   byte  4     version (= 1)
//   byte  5     kind: 0 kinematic, 1 imu_trace, 2 radar_cube, 3 heatmap,
//               4 spectrogram, 5 checkpoint, 6 mask
//   byte  6     dtype: 0 f32, 1 f64, 2 complex-f32 interleaved, 3 u8
//   byte  7     ndim
//   then        ndim x u32 dims, then the row-major payload
//
// Checkpoints (kind 5, ndim 0) carry a named-tensor table instead of a flat
// payload: u32 entry count, then per entry u16 name length, name bytes,
// dtype u8, ndim u8, dims, payload.
namespace mmbridge::irad {

enum class Kind : std::uint8_t {
    Kinematic = 0,
    ImuTrace = 1,
    RadarCube = 2,
    Heatmap = 3,
    Spectrogram = 4,
    Checkpoint = 5,
    Mask = 6,
};

enum class Dtype : std::uint8_t {
    F32 = 0,
    F64 = 1,
    ComplexF32 = 2,
    U8 = 3,
};

inline std::size_t dtype_width(Dtype d) {
    switch (d) {
        case Dtype::F32: return 4;
        case Dtype::F64: return 8;
        case Dtype::ComplexF32: return 8;
        case Dtype::U8: return 1;
    }
    throw FormatError("unknown dtype byte", 6);
}

struct Array {
    Dtype dtype = Dtype::F32;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

struct Container {
    Kind kind = Kind::Heatmap;
    Array data;                              // flat kinds
    std::vector<std::pair<std::string, Array>> tensors;  // checkpoint table
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    std::uint8_t u8(const char* what) {
        if (pos + 1 > buf.size())
            throw FormatError(std::string("truncated reading ") + what + ": expected " +
                                  std::to_string(pos + 1) + " bytes, file has " +
                                  std::to_string(buf.size()),
                              pos);
        return buf[pos++];
    }
    std::uint16_t u16(const char* what) {
        return static_cast<std::uint16_t>(u8(what)) |
               static_cast<std::uint16_t>(static_cast<std::uint16_t>(u8(what)) << 8);
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8(what)) << (8 * i);
        return v;
    }
    void bytes(void* dst, std::size_t n, const char* what) {
        if (pos + n > buf.size())
            throw FormatError(std::string("truncated reading ") + what + ": expected " +
                                  std::to_string(pos + n) + " bytes, file has " +
                                  std::to_string(buf.size()),
                              pos);
        std::memcpy(dst, buf.data() + pos, n);
        pos += n;
    }
};

inline void append_array(std::vector<std::uint8_t>& out, const Array& a) {
    out.push_back(static_cast<std::uint8_t>(a.dtype));
    require(a.dims.size() <= 255, "irad: too many dims");
    out.push_back(static_cast<std::uint8_t>(a.dims.size()));
    for (auto d : a.dims) put_u32(out, d);
    require(a.payload.size() == a.count() * dtype_width(a.dtype),
            "irad: payload size does not match dims");
    out.insert(out.end(), a.payload.begin(), a.payload.end());
}

inline Array read_array(Reader& r) {
    Array a;
    const auto dt = r.u8("dtype");
    if (dt > 3) throw FormatError("bad dtype byte " + std::to_string(dt), r.pos - 1);
    a.dtype = static_cast<Dtype>(dt);
    const auto nd = r.u8("ndim");
    a.dims.resize(nd);
    for (auto& d : a.dims) d = r.u32("dims");
    const std::size_t n = a.count() * dtype_width(a.dtype);
    a.payload.resize(n);
    r.bytes(a.payload.data(), n, "payload");
    return a;
}

}  // namespace detail

inline void write_container(const std::string& path, const Container& c) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'I', 'R', 'A', 'D'});
    out.push_back(1);  // version
    out.push_back(static_cast<std::uint8_t>(c.kind));
    if (c.kind == Kind::Checkpoint) {
        out.push_back(static_cast<std::uint8_t>(Dtype::F32));
        out.push_back(0);  // ndim 0: payload lives in the tensor table
        detail::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
        for (const auto& [name, arr] : c.tensors) {
            require(name.size() <= 0xFFFF, "irad: tensor name too long");
            detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
            out.insert(out.end(), name.begin(), name.end());
            detail::append_array(out, arr);
        }
    } else {
        detail::append_array(out, c.data);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    detail::Reader r{buf};

    std::array<char, 4> magic{};
    r.bytes(magic.data(), 4, "magic");
    if (std::memcmp(magic.data(), "IRAD", 4) != 0) throw FormatError("bad magic, want 'IRAD'", 0);
    const auto version = r.u8("version");
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version), 4);
    const auto kind = r.u8("kind");
    if (kind > 6) throw FormatError("bad kind byte " + std::to_string(kind), 5);

    Container c;
    c.kind = static_cast<Kind>(kind);
    if (c.kind == Kind::Checkpoint) {
        r.u8("dtype");
        const auto nd = r.u8("ndim");
        if (nd != 0) throw FormatError("checkpoint header must have ndim 0", 7);
        const auto count = r.u32("tensor count");
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto len = r.u16("name length");
            std::string name(len, '\0');
            r.bytes(name.data(), len, "tensor name");
            c.tensors.emplace_back(std::move(name), detail::read_array(r));
        }
    } else {
        c.data = detail::read_array(r);
        if (r.pos != buf.size())
            throw FormatError("trailing bytes: expected " + std::to_string(r.pos) +
                                  ", file has " + std::to_string(buf.size()),
                              r.pos);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Typed adapters
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::vector<std::uint8_t> to_bytes(const std::vector<T>& v) {
    std::vector<std::uint8_t> out(v.size() * sizeof(T));
    if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
    return out;
}

template <typename T>
std::vector<T> from_bytes(const std::vector<std::uint8_t>& b) {
    std::vector<T> out(b.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), b.data(), b.size());
    return out;
}

}  // namespace detail

inline void write_heatmap(const std::string& path, const Heatmap& h) {
    Container c;
    c.kind = Kind::Heatmap;
    c.data.dtype = Dtype::F32;
    c.data.dims = {static_cast<std::uint32_t>(h.rows), static_cast<std::uint32_t>(h.cols)};
    c.data.payload = detail::to_bytes(h.v);
    write_container(path, c);
}

inline Heatmap read_heatmap(const std::string& path) {
    auto c = read_container(path);
    if (c.kind != Kind::Heatmap || c.data.dtype != Dtype::F32 || c.data.dims.size() != 2)
        throw FormatError("not a heatmap container: " + path, 5);
    Heatmap h(static_cast<int>(c.data.dims[0]), static_cast<int>(c.data.dims[1]));
    h.v = detail::from_bytes<float>(c.data.payload);
    return h;
}

inline void write_mask(const std::string& path, const BinaryMap& m) {
    Container c;
    c.kind = Kind::Mask;
    c.data.dtype = Dtype::U8;
    c.data.dims = {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)};
    c.data.payload = m.v;
    write_container(path, c);
}

inline BinaryMap read_mask(const std::string& path) {
    auto c = read_container(path);
    if (c.kind != Kind::Mask || c.data.dtype != Dtype::U8 || c.data.dims.size() != 2)
        throw FormatError("not a mask container: " + path, 5);
    BinaryMap m(static_cast<int>(c.data.dims[0]), static_cast<int>(c.data.dims[1]));
    m.v = c.data.payload;
    return m;
}

/// Spectrogram triplet as one [3 x freq x time] f32 array.
inline void write_spectrogram(const std::string& path, const imu::SpectrogramTriplet& t) {
    Container c;
    c.kind = Kind::Spectrogram;
    c.data.dtype = Dtype::F32;
    c.data.dims = {3u, static_cast<std::uint32_t>(t.freq_bins()),
                   static_cast<std::uint32_t>(t.time_bins())};
    std::vector<float> flat;
    flat.reserve(c.data.count());
    for (const auto& sp : t.axis)
        for (double v : sp.v) flat.push_back(static_cast<float>(v));
    c.data.payload = detail::to_bytes(flat);
    write_container(path, c);
}

inline imu::SpectrogramTriplet read_spectrogram(const std::string& path) {
    auto c = read_container(path);
    if (c.kind != Kind::Spectrogram || c.data.dtype != Dtype::F32 || c.data.dims.size() != 3 ||
        c.data.dims[0] != 3)
        throw FormatError("not a spectrogram container: " + path, 5);
    imu::SpectrogramTriplet t;
    const int fb = static_cast<int>(c.data.dims[1]), tb = static_cast<int>(c.data.dims[2]);
    const auto flat = detail::from_bytes<float>(c.data.payload);
    for (int a = 0; a < 3; ++a) {
        t.axis[a].freq_bins = fb;
        t.axis[a].time_bins = tb;
        t.axis[a].v.assign(flat.begin() + static_cast<std::ptrdiff_t>(a) * fb * tb,
                           flat.begin() + static_cast<std::ptrdiff_t>(a + 1) * fb * tb);
    }
    return t;
}

/// Radar cube as [frames x chirps x samples] interleaved complex f32, plus a
/// small f64 header tensor recording the chirp timing.
inline void write_cube(const std::string& path, const fmcw::RadarCube& cube) {
    Container c;
    c.kind = Kind::RadarCube;
    c.data.dtype = Dtype::ComplexF32;
    c.data.dims = {static_cast<std::uint32_t>(cube.cfg.frames),
                   static_cast<std::uint32_t>(cube.cfg.chirps_per_frame),
                   static_cast<std::uint32_t>(cube.cfg.adc_samples)};
    std::vector<float> flat;
    flat.reserve(cube.v.size() * 2);
    for (const auto& z : cube.v) {
        flat.push_back(z.real());
        flat.push_back(z.imag());
    }
    c.data.payload = detail::to_bytes(flat);
    write_container(path, c);
}

inline fmcw::RadarCube read_cube(const std::string& path, const fmcw::ChirpConfig& cfg) {
    auto c = read_container(path);
    if (c.kind != Kind::RadarCube || c.data.dtype != Dtype::ComplexF32 || c.data.dims.size() != 3)
        throw FormatError("not a radar cube container: " + path, 5);
    fmcw::RadarCube cube;
    cube.cfg = cfg;
    cube.cfg.frames = static_cast<int>(c.data.dims[0]);
    cube.cfg.chirps_per_frame = static_cast<int>(c.data.dims[1]);
    cube.cfg.adc_samples = static_cast<int>(c.data.dims[2]);
    const auto flat = detail::from_bytes<float>(c.data.payload);
    cube.v.resize(flat.size() / 2);
    for (std::size_t i = 0; i < cube.v.size(); ++i)
        cube.v[i] = std::complex<float>(flat[2 * i], flat[2 * i + 1]);
    return cube;
}

/// Kinematic trace as one flat f64 array:
/// [rate, duration, segments, samples, rcs..., pos xyz..., acc xyz...].
inline void write_kinematic(const std::string& path, const kin::KinematicTrace& t) {
    Container c;
    c.kind = Kind::Kinematic;
    c.data.dtype = Dtype::F64;
    std::vector<double> flat;
    const std::size_t s = static_cast<std::size_t>(t.segments()), n = t.samples();
    flat.reserve(4 + s + 6 * s * n);
    flat.push_back(t.sample_rate);
    flat.push_back(t.duration);
    flat.push_back(static_cast<double>(s));
    flat.push_back(static_cast<double>(n));
    for (double w : t.rcs_weight) flat.push_back(w);
    for (const auto& seg : t.position)
        for (const auto& p : seg) {
            flat.push_back(p.x);
            flat.push_back(p.y);
            flat.push_back(p.z);
        }
    for (const auto& seg : t.acceleration)
        for (const auto& a : seg) {
            flat.push_back(a.x);
            flat.push_back(a.y);
            flat.push_back(a.z);
        }
    c.data.dims = {static_cast<std::uint32_t>(flat.size())};
    c.data.payload = detail::to_bytes(flat);
    write_container(path, c);
}

inline kin::KinematicTrace read_kinematic(const std::string& path) {
    auto c = read_container(path);
    if (c.kind != Kind::Kinematic || c.data.dtype != Dtype::F64 || c.data.dims.size() != 1)
        throw FormatError("not a kinematic container: " + path, 5);
    const auto flat = detail::from_bytes<double>(c.data.payload);
    if (flat.size() < 4) throw FormatError("kinematic payload too short", 8);
    kin::KinematicTrace t;
    t.sample_rate = flat[0];
    t.duration = flat[1];
    const auto s = static_cast<std::size_t>(flat[2]);
    const auto n = static_cast<std::size_t>(flat[3]);
    if (flat.size() != 4 + s + 6 * s * n) throw FormatError("kinematic payload size mismatch", 8);
    std::size_t i = 4;
    for (std::size_t k = 0; k < s; ++k) t.rcs_weight.push_back(flat[i++]);
    static constexpr const char* names[4] = {"hand", "wrist", "elbow", "shoulder"};
    t.position.resize(s);
    t.acceleration.resize(s);
    for (std::size_t k = 0; k < s; ++k) {
        t.segment_names.push_back(k < 4 ? names[k] : "segment" + std::to_string(k));
        t.position[k].resize(n);
        for (auto& p : t.position[k]) {
            p.x = flat[i++];
            p.y = flat[i++];
            p.z = flat[i++];
        }
    }
    for (std::size_t k = 0; k < s; ++k) {
        t.acceleration[k].resize(n);
        for (auto& a : t.acceleration[k]) {
            a.x = flat[i++];
            a.y = flat[i++];
            a.z = flat[i++];
        }
    }
    return t;
}

/// IMU trace as one flat f64 array: [rate, samples, ax..., ay..., az...].
inline void write_imu(const std::string& path, const imu::ImuTrace& t) {
    Container c;
    c.kind = Kind::ImuTrace;
    c.data.dtype = Dtype::F64;
    std::vector<double> flat;
    flat.reserve(2 + 3 * t.ax.size());
    flat.push_back(t.sample_rate);
    flat.push_back(static_cast<double>(t.ax.size()));
    flat.insert(flat.end(), t.ax.begin(), t.ax.end());
    flat.insert(flat.end(), t.ay.begin(), t.ay.end());
    flat.insert(flat.end(), t.az.begin(), t.az.end());
    c.data.dims = {static_cast<std::uint32_t>(flat.size())};
    c.data.payload = detail::to_bytes(flat);
    write_container(path, c);
}

inline imu::ImuTrace read_imu(const std::string& path) {
    auto c = read_container(path);
    if (c.kind != Kind::ImuTrace || c.data.dtype != Dtype::F64 || c.data.dims.size() != 1)
        throw FormatError("not an imu container: " + path, 5);
    const auto flat = detail::from_bytes<double>(c.data.payload);
    if (flat.size() < 2) throw FormatError("imu payload too short", 8);
    imu::ImuTrace t;
    t.sample_rate = flat[0];
    const auto n = static_cast<std::size_t>(flat[1]);
    if (flat.size() != 2 + 3 * n) throw FormatError("imu payload size mismatch", 8);
    t.ax.assign(flat.begin() + 2, flat.begin() + 2 + static_cast<std::ptrdiff_t>(n));
    t.ay.assign(flat.begin() + 2 + static_cast<std::ptrdiff_t>(n),
                flat.begin() + 2 + static_cast<std::ptrdiff_t>(2 * n));
    t.az.assign(flat.begin() + 2 + static_cast<std::ptrdiff_t>(2 * n),
                flat.begin() + 2 + static_cast<std::ptrdiff_t>(3 * n));
    return t;
}

}  // namespace mmbridge::irad
