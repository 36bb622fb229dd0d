#include "ekdaa/data.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ekdaa/errors.hpp"
#include "ekdaa/rng.hpp"

namespace ekdaa {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

bool is_gzip(const std::vector<std::uint8_t>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw FormatError("zlib init failed for " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("gzip decompression failed for " + path);
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_maybe_gz(const std::string& path) {
    auto raw = read_file(path);
    return is_gzip(raw) ? gunzip(raw, path) : raw;
}

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::uint32_t v, std::ostream& os) {
    const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                               std::uint8_t(v >> 8), std::uint8_t(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_maybe_gz(images_path);
    const auto lab = read_maybe_gz(labels_path);

    if (img.size() < 16) throw FormatError("truncated IDX image header in " + images_path);
    const std::uint32_t img_magic = be32(img.data());
    if (img_magic != 0x00000803)
        throw FormatError("bad IDX image magic in " + images_path + ": got 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof(b), "%08x", img_magic); return std::string(b); }());
    const std::uint32_t n = be32(img.data() + 4);
    const std::uint32_t h = be32(img.data() + 8);
    const std::uint32_t w = be32(img.data() + 12);
    const std::size_t need = 16 + static_cast<std::size_t>(n) * h * w;
    if (img.size() < need)
        throw FormatError("truncated IDX image payload in " + images_path + ": expected " +
                          std::to_string(need) + " bytes, got " + std::to_string(img.size()));

    if (lab.size() < 8) throw FormatError("truncated IDX label header in " + labels_path);
    const std::uint32_t lab_magic = be32(lab.data());
    if (lab_magic != 0x00000801)
        throw FormatError("bad IDX label magic in " + labels_path + ": got 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof(b), "%08x", lab_magic); return std::string(b); }());
    const std::uint32_t nl = be32(lab.data() + 4);
    if (nl != n)
        throw FormatError("IDX image/label count mismatch: " + std::to_string(n) + " vs " +
                          std::to_string(nl));
    if (lab.size() < 8 + nl)
        throw FormatError("truncated IDX label payload in " + labels_path);

    Dataset d;
    d.name = "idx";
    d.class_count = 10;
    d.samples.reserve(n);
    d.labels.reserve(n);
    const std::uint8_t* px = img.data() + 16;
    for (std::uint32_t i = 0; i < n; ++i) {
        FeatureStack<float> s(1, static_cast<int>(h), static_cast<int>(w));
        for (std::size_t j = 0; j < s.size(); ++j)
            s.data[j] = static_cast<float>(px[j]) / 255.0f;
        px += static_cast<std::size_t>(h) * w;
        d.samples.push_back(std::move(s));
        d.labels.push_back(static_cast<int>(lab[8 + i]));
    }
    return d;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
    constexpr std::size_t kRecord = 3073;  // 1 label + 3*32*32 pixels
    Dataset d;
    d.name = "cifar10";
    d.class_count = 10;
    for (const auto& path : batch_paths) {
        const auto bytes = read_maybe_gz(path);
        if (bytes.size() % kRecord != 0)
            throw FormatError("CIFAR-10 batch " + path + " length " + std::to_string(bytes.size()) +
                              " is not a multiple of " + std::to_string(kRecord));
        const std::size_t n = bytes.size() / kRecord;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t* rec = bytes.data() + i * kRecord;
            const int label = rec[0];
            if (label > 9)
                throw FormatError("CIFAR-10 label out of range in " + path + ": " +
                                  std::to_string(label));
            FeatureStack<float> s(3, 32, 32);
            for (std::size_t j = 0; j < 3072; ++j)
                s.data[j] = static_cast<float>(rec[1 + j]) / 255.0f;
            d.samples.push_back(std::move(s));
            d.labels.push_back(label);
        }
    }
    return d;
}

Dataset synth_blobs(std::uint64_t seed, int n, int classes, int size) {
    if (classes < 2) throw DimensionError("synth_blobs: need at least 2 classes");
    Dataset d;
    d.name = "synth";
    d.class_count = classes;
    const double cx0 = (size - 1) / 2.0;
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, 0xb10b, static_cast<std::uint64_t>(i)));
        const int label = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(classes)));
        // Oriented bar through a jittered center, angle set by the class.
        const double theta = 3.14159265358979323846 * label / classes;
        const double dx = std::cos(theta), dy = std::sin(theta);
        const double jx = rng.next_uniform(-2.0, 2.0), jy = rng.next_uniform(-2.0, 2.0);
        FeatureStack<float> s(1, size, size);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double px = x - cx0 - jx, py = y - cx0 - jy;
                const double dist = std::abs(px * dy - py * dx);   // distance to bar axis
                const double along = std::abs(px * dx + py * dy);  // position along the bar
                double v = 0.0;
                if (dist < 1.5 && along < size * 0.4) v = 1.0;
                v += rng.next_uniform(-0.15, 0.15);
                s.at(0, y, x) = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
        }
        d.samples.push_back(std::move(s));
        d.labels.push_back(label);
    }
    return d;
}

Dataset subset(const Dataset& d, std::uint64_t seed, std::size_t n) {
    std::vector<std::size_t> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(seed, 0x5b5e7));
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_index(i)]);
    Dataset out;
    out.name = d.name;
    out.class_count = d.class_count;
    const std::size_t take = std::min(n, idx.size());
    for (std::size_t i = 0; i < take; ++i) {
        out.samples.push_back(d.samples[idx[i]]);
        out.labels.push_back(d.labels[idx[i]]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan, int epoch) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(mix_seed(plan.seed, 0xba7c4, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.next_index(i)]);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
        const std::size_t end = std::min(n, start + plan.batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

void write_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path) {
    std::ofstream fi(images_path, std::ios::binary);
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fi || !fl) throw FormatError("cannot write IDX files");
    const int h = d.samples.empty() ? 0 : d.samples[0].height;
    const int w = d.samples.empty() ? 0 : d.samples[0].width;
    put_be32(0x00000803, fi);
    put_be32(static_cast<std::uint32_t>(d.size()), fi);
    put_be32(static_cast<std::uint32_t>(h), fi);
    put_be32(static_cast<std::uint32_t>(w), fi);
    put_be32(0x00000801, fl);
    put_be32(static_cast<std::uint32_t>(d.size()), fl);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (float v : d.samples[i].data) {
            const auto b = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            fi.put(static_cast<char>(b));
        }
        fl.put(static_cast<char>(d.labels[i]));
    }
}

void write_cifar10(const Dataset& d, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path);
    for (std::size_t i = 0; i < d.size(); ++i) {
        f.put(static_cast<char>(d.labels[i]));
        for (float v : d.samples[i].data)
            f.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f))));
    }
}

}  // namespace ekdaa
