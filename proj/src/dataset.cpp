#include "icnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace icnn {

Tensor Dataset::sample(int index) const {
    const int chw = channels() * height() * width();
    Tensor t({channels(), height(), width()});
    std::memcpy(t.data(), images.data() + static_cast<std::size_t>(index) * chw,
                static_cast<std::size_t>(chw) * sizeof(float));
    return t;
}

Dataset Dataset::subset(const std::vector<int>& indices, std::string split_tag) const {
    Dataset out;
    out.num_classes = num_classes;
    out.split = std::move(split_tag);
    out.images = Tensor({static_cast<int>(indices.size()), channels(), height(), width()});
    const int chw = channels() * height() * width();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::memcpy(out.images.data() + i * static_cast<std::size_t>(chw),
                    images.data() + static_cast<std::size_t>(indices[i]) * chw,
                    static_cast<std::size_t>(chw) * sizeof(float));
        out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
    }
    return out;
}

Dataset Dataset::take(int n, std::string split_tag) const {
    if (n > size()) throw ArgumentError("dataset has fewer samples than requested");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return subset(idx, std::move(split_tag));
}

namespace {

std::uint32_t read_u32_be(std::ifstream& f, std::size_t offset, const char* what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(std::string("truncated ") + what, offset);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw ArgumentError("cannot open " + images_path);
    const std::uint32_t magic = read_u32_be(fi, 0, "image magic");
    const std::uint32_t type = (magic >> 8) & 0xff;
    const std::uint32_t ndim = magic & 0xff;
    if ((magic >> 16) != 0 || (type != 0x08 && type != 0x0d) || (ndim != 3 && ndim != 4)) {
        throw FormatError("bad IDX image magic", 0);
    }
    std::size_t off = 4;
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        dims.push_back(static_cast<int>(read_u32_be(fi, off, "image dimension")));
        off += 4;
    }
    const int n = dims[0];
    const int c = ndim == 4 ? dims[1] : 1;
    const int h = ndim == 4 ? dims[2] : dims[1];
    const int w = ndim == 4 ? dims[3] : dims[2];
    if (n < 1 || c < 1 || h < 1 || w < 1) throw FormatError("non-positive IDX extent", 4);

    Dataset ds;
    ds.images = Tensor({n, c, h, w});
    const std::size_t count = ds.images.size();
    if (type == 0x08) {
        std::vector<unsigned char> bytes(count);
        if (!fi.read(reinterpret_cast<char*>(bytes.data()),
                     static_cast<std::streamsize>(count))) {
            throw FormatError("truncated IDX image payload",
                              off + static_cast<std::size_t>(fi.gcount()));
        }
        for (std::size_t i = 0; i < count; ++i) {
            ds.images[i] = static_cast<float>(bytes[i]) / 255.0f;
        }
    } else {
        if (!fi.read(reinterpret_cast<char*>(ds.images.data()),
                     static_cast<std::streamsize>(count * sizeof(float)))) {
            throw FormatError("truncated IDX image payload",
                              off + static_cast<std::size_t>(fi.gcount()));
        }
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw ArgumentError("cannot open " + labels_path);
    const std::uint32_t lmagic = read_u32_be(fl, 0, "label magic");
    if (lmagic != 0x00000801u) throw FormatError("bad IDX label magic", 0);
    const std::uint32_t ln = read_u32_be(fl, 4, "label count");
    if (static_cast<int>(ln) != n) {
        throw FormatError("label count disagrees with image count", 4);
    }
    std::vector<unsigned char> lbytes(ln);
    if (!fl.read(reinterpret_cast<char*>(lbytes.data()), static_cast<std::streamsize>(ln))) {
        throw FormatError("truncated IDX label payload",
                          8 + static_cast<std::size_t>(fl.gcount()));
    }
    int max_label = 0;
    for (unsigned char b : lbytes) {
        ds.labels.push_back(static_cast<int>(b));
        max_label = std::max(max_label, static_cast<int>(b));
    }
    ds.num_classes = max_label + 1;
    ds.split = "train";
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
              bool float_payload) {
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw ArgumentError("cannot open " + images_path + " for writing");
    const auto write_u32_be = [](std::ofstream& f, std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    const bool mono = ds.channels() == 1;
    write_u32_be(fi, (float_payload ? 0x0d00u : 0x0800u) | (mono ? 3u : 4u));
    write_u32_be(fi, static_cast<std::uint32_t>(ds.size()));
    if (!mono) write_u32_be(fi, static_cast<std::uint32_t>(ds.channels()));
    write_u32_be(fi, static_cast<std::uint32_t>(ds.height()));
    write_u32_be(fi, static_cast<std::uint32_t>(ds.width()));
    if (float_payload) {
        fi.write(reinterpret_cast<const char*>(ds.images.data()),
                 static_cast<std::streamsize>(ds.images.size() * sizeof(float)));
    } else {
        std::vector<unsigned char> bytes(ds.images.size());
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            const float v = std::clamp(ds.images[i], 0.0f, 1.0f);
            bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        fi.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    }
    if (!fi) throw ArgumentError("write failed for " + images_path);

    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw ArgumentError("cannot open " + labels_path + " for writing");
    write_u32_be(fl, 0x00000801u);
    write_u32_be(fl, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) fl.put(static_cast<char>(l));
    if (!fl) throw ArgumentError("write failed for " + labels_path);
}

std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction,
                                             std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction >= 1.0) {
        throw ArgumentError("validation fraction must lie in (0, 1)");
    }
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.num_classes));
    for (int i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    }
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    std::vector<int> main_idx, val_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        const int k = static_cast<int>(std::floor(static_cast<double>(idx.size()) * fraction));
        if (k < 1) {
            throw ArgumentError("class " + std::to_string(c) +
                                " has too few samples for the validation fraction");
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + k);
        main_idx.insert(main_idx.end(), idx.begin() + k, idx.end());
    }
    std::sort(main_idx.begin(), main_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {ds.subset(main_idx, ds.split), ds.subset(val_idx, "val")};
}

Dataset synth_dataset(int classes, int per_class, int height, int width, std::uint64_t seed,
                      double noise_sigma, double center_jitter) {
    if (classes < 2) throw ArgumentError("synthetic dataset needs at least two classes");
    if (per_class < 1 || height < 1 || width < 1) {
        throw ArgumentError("synthetic dataset extents must be positive");
    }
    Dataset ds;
    ds.num_classes = classes;
    ds.split = "train";
    ds.images = Tensor({classes * per_class, 1, height, width});
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    std::normal_distribution<double> noise(0.0, noise_sigma);
    std::uniform_real_distribution<double> jitter(-center_jitter, center_jitter);
    const double cy0 = 0.5 * (height - 1), cx0 = 0.5 * (width - 1);
    const double ring = 0.30 * std::min(height, width);
    const double blob_sigma = std::max(1.2, 0.11 * std::min(height, width));
    const double inv2s2 = 1.0 / (2.0 * blob_sigma * blob_sigma);
    std::size_t p = 0;
    for (int k = 0; k < classes; ++k) {
        const double angle = 2.0 * 3.14159265358979323846 * k / classes;
        const double base_cy = cy0 + ring * std::sin(angle);
        const double base_cx = cx0 + ring * std::cos(angle);
        for (int s = 0; s < per_class; ++s) {
            double cy = base_cy, cx = base_cx;
            if (center_jitter > 0.0) {
                cy += jitter(rng) * height;
                cx += jitter(rng) * width;
            }
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    double v = std::exp(-d2 * inv2s2) + noise(rng);
                    ds.images[p++] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
            ds.labels.push_back(k);
        }
    }
    return ds;
}

void mean_subtract(Dataset& ds) {
    const std::size_t chw =
        static_cast<std::size_t>(ds.channels()) * ds.height() * ds.width();
    std::vector<double> mean(chw, 0.0);
    for (int i = 0; i < ds.size(); ++i) {
        const float* img = ds.images.data() + static_cast<std::size_t>(i) * chw;
        for (std::size_t j = 0; j < chw; ++j) mean[j] += img[j];
    }
    for (double& m : mean) m /= ds.size();
    for (int i = 0; i < ds.size(); ++i) {
        float* img = ds.images.data() + static_cast<std::size_t>(i) * chw;
        for (std::size_t j = 0; j < chw; ++j) {
            img[j] = static_cast<float>(img[j] - mean[j]);
        }
    }
}

}  // namespace icnn
