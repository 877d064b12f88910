#include "ncd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ncd/image.hpp"
#include "ncd/pdm1.hpp"

namespace ncd {
namespace {

using nlohmann::json;

struct Segment {
    double x0, y0, x1, y1;
};

// Shared stroke vocabulary in a local [0,1] frame. Glyph classes differ in
// how strokes are arranged, not in the strokes themselves, so small crops of
// different classes look alike while the global layout stays distinctive.
const std::vector<Segment> kStrokeVocab = {
    {0.05, 0.5, 0.95, 0.5},  // horizontal
    {0.5, 0.05, 0.5, 0.95},  // vertical
    {0.1, 0.1, 0.9, 0.9},    // diagonal
    {0.1, 0.9, 0.9, 0.1},    // anti-diagonal
    {0.1, 0.1, 0.9, 0.5},    // shallow slant
    {0.1, 0.5, 0.9, 0.95},   // low slant
};

double point_segment_dist(double px, double py, const Segment& s) {
    const double vx = s.x1 - s.x0;
    const double vy = s.y1 - s.y0;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (s.x0 + t * vx);
    const double dy = py - (s.y0 + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

void render_segments(Image& img, const std::vector<Segment>& segments, double width_px,
                     double intensity) {
    const double half = 0.5 * width_px;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double best = 1e30;
            for (const Segment& s : segments) {
                best = std::min(best, point_segment_dist(x, y, s));
            }
            const double coverage = std::clamp(half + 0.5 - best, 0.0, 1.0);
            if (coverage > 0.0) {
                float& px = img.at(y, x, 0);
                px = std::max(px, static_cast<float>(intensity * coverage));
            }
        }
    }
}

struct GlyphStroke {
    int vocab_id;
    double cx, cy; // placement center in canvas fraction
    double scale;
};

std::vector<int> class_list(std::size_t n_base, std::size_t n_novel) {
    std::vector<int> out(n_base + n_novel);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
    return out;
}

json shape_to_json(const PayloadShape& p) {
    if (p.kind == PayloadKind::vector) {
        return json{{"kind", "vector"}, {"shape", {p.dim}}};
    }
    return json{{"kind", "image"}, {"shape", {p.height, p.width, p.channels}}};
}

PayloadShape shape_from_json(const json& j) {
    PayloadShape p;
    const std::string kind = j.at("kind").get<std::string>();
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (kind == "vector") {
        if (shape.size() != 1) throw Malformed("manifest: vector payload needs 1-d shape");
        p.kind = PayloadKind::vector;
        p.dim = shape[0];
    } else if (kind == "image") {
        if (shape.size() != 3) throw Malformed("manifest: image payload needs [h, w, c]");
        p.kind = PayloadKind::image;
        p.height = shape[0];
        p.width = shape[1];
        p.channels = shape[2];
    } else {
        throw Malformed("manifest: unknown payload kind '" + kind + "'");
    }
    return p;
}

std::vector<int> labels_from_matrix(const Matrix& m) {
    if (m.cols() != 1) throw Malformed("label matrix must be n x 1");
    std::vector<int> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out[i] = static_cast<int>(std::lround(m(i, 0)));
    }
    return out;
}

Matrix labels_to_matrix(const std::vector<int>& y) {
    Matrix m(y.size(), 1);
    for (std::size_t i = 0; i < y.size(); ++i) m(i, 0) = static_cast<float>(y[i]);
    return m;
}

} // namespace

Dataset synth_gaussians(std::size_t n_base, std::size_t n_novel, std::size_t dim,
                        std::size_t per_class, double separation, std::uint64_t seed) {
    if (separation < 0.0) throw Error("synth_gaussians: separation must be >= 0");
    if (per_class < 2) throw Error("synth_gaussians: need at least 2 samples per class");
    const std::size_t n_classes = n_base + n_novel;
    const std::size_t n_train_pc = (per_class * 4) / 5;
    const std::size_t n_test_pc = per_class - n_train_pc;

    Dataset ds;
    ds.name = "gaussians";
    ds.payload.kind = PayloadKind::vector;
    ds.payload.dim = static_cast<int>(dim);
    const std::vector<int> classes = class_list(n_base, n_novel);
    ds.base_classes.assign(classes.begin(), classes.begin() + n_base);
    ds.novel_classes.assign(classes.begin() + n_base, classes.end());

    ds.train_x = Matrix(n_classes * n_train_pc, dim);
    ds.test_x = Matrix(n_classes * n_test_pc, dim);
    std::size_t train_row = 0, test_row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        Rng rng = Rng(seed, 0x67617573ULL).child(c);
        std::vector<double> mean(dim, 0.0);
        double norm = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] = rng.normal();
            norm += mean[j] * mean[j];
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] = norm > 1e-12 ? separation * mean[j] / norm : 0.0;
        }
        for (std::size_t s = 0; s < per_class; ++s) {
            const bool is_train = s < n_train_pc;
            Matrix& target = is_train ? ds.train_x : ds.test_x;
            const std::size_t row = is_train ? train_row++ : test_row++;
            float* out = target.row_ptr(row);
            for (std::size_t j = 0; j < dim; ++j) {
                out[j] = static_cast<float>(mean[j] + rng.normal());
            }
            (is_train ? ds.train_y : ds.test_y).push_back(static_cast<int>(c));
        }
    }
    return ds;
}

Dataset synth_glyphs(std::size_t n_base, std::size_t n_novel, int size,
                     std::size_t per_class, std::uint64_t seed, double jitter) {
    if (size < 16) throw Error("synth_glyphs: size must be >= 16");
    if (per_class < 2) throw Error("synth_glyphs: need at least 2 samples per class");
    const std::size_t n_classes = n_base + n_novel;
    const std::size_t n_train_pc = (per_class * 4) / 5;
    const std::size_t n_test_pc = per_class - n_train_pc;

    Dataset ds;
    ds.name = "glyphs";
    ds.payload.kind = PayloadKind::image;
    ds.payload.height = size;
    ds.payload.width = size;
    ds.payload.channels = 1;
    const std::vector<int> classes = class_list(n_base, n_novel);
    ds.base_classes.assign(classes.begin(), classes.begin() + n_base);
    ds.novel_classes.assign(classes.begin() + n_base, classes.end());

    const std::size_t flat = static_cast<std::size_t>(size) * size;
    ds.train_x = Matrix(n_classes * n_train_pc, flat);
    ds.test_x = Matrix(n_classes * n_test_pc, flat);

    const double base_width = size / 14.0;
    std::size_t train_row = 0, test_row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        Rng template_rng = Rng(seed, 0x676c797068ULL).child(c);
        const std::size_t n_strokes = 3 + template_rng.below(3); // 3..5
        std::vector<GlyphStroke> strokes(n_strokes);
        for (GlyphStroke& st : strokes) {
            st.vocab_id = static_cast<int>(template_rng.below(kStrokeVocab.size()));
            st.cx = template_rng.uniform(0.2, 0.8);
            st.cy = template_rng.uniform(0.2, 0.8);
            st.scale = template_rng.uniform(0.3, 0.55);
        }
        for (std::size_t s = 0; s < per_class; ++s) {
            Rng rng = Rng(seed, 0x72656e646572ULL).child(c * 1000003ULL + s);
            // handwriting-like variation: the whole glyph shifts, scales and
            // tilts a little, strokes wobble, width and ink vary
            const double shift_x = jitter * rng.uniform(-0.08, 0.08) * size;
            const double shift_y = jitter * rng.uniform(-0.08, 0.08) * size;
            const double glyph_scale = 1.0 + jitter * rng.uniform(-0.15, 0.15);
            const double tilt = jitter * rng.uniform(-12.0, 12.0) * M_PI / 180.0;
            const double ct = std::cos(tilt), st_ = std::sin(tilt);
            const double width_px =
                base_width * (1.0 + jitter * rng.uniform(-0.2, 0.2));
            const double intensity = 0.85 + jitter * rng.uniform(-0.1, 0.1);

            const double center = 0.5 * size;
            auto place = [&](double fx, double fy, double& px, double& py) {
                // glyph frame -> canvas pixels, about the canvas center
                const double gx = (fx - 0.5) * glyph_scale * size;
                const double gy = (fy - 0.5) * glyph_scale * size;
                px = center + ct * gx - st_ * gy + shift_x;
                py = center + st_ * gx + ct * gy + shift_y;
            };

            std::vector<Segment> segments;
            segments.reserve(strokes.size());
            for (const GlyphStroke& st : strokes) {
                const Segment& v = kStrokeVocab[st.vocab_id];
                Segment seg;
                const double ex0 = jitter * rng.uniform(-0.015, 0.015);
                const double ey0 = jitter * rng.uniform(-0.015, 0.015);
                const double ex1 = jitter * rng.uniform(-0.015, 0.015);
                const double ey1 = jitter * rng.uniform(-0.015, 0.015);
                place(st.cx + st.scale * (v.x0 - 0.5) + ex0,
                      st.cy + st.scale * (v.y0 - 0.5) + ey0, seg.x0, seg.y0);
                place(st.cx + st.scale * (v.x1 - 0.5) + ex1,
                      st.cy + st.scale * (v.y1 - 0.5) + ey1, seg.x1, seg.y1);
                segments.push_back(seg);
            }
            Image img(size, size, 1);
            render_segments(img, segments, width_px, intensity);
            clamp_pixels(img);

            const bool is_train = s < n_train_pc;
            Matrix& target = is_train ? ds.train_x : ds.test_x;
            const std::size_t row = is_train ? train_row++ : test_row++;
            std::copy(img.pixels.begin(), img.pixels.end(), target.row_ptr(row));
            (is_train ? ds.train_y : ds.test_y).push_back(static_cast<int>(c));
        }
    }
    return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("save_dataset: cannot create " + dir.string());

    std::size_t n_labelled = 0;
    const std::set<int> base(ds.base_classes.begin(), ds.base_classes.end());
    for (int y : ds.train_y) {
        if (base.count(y)) ++n_labelled;
    }

    json manifest;
    manifest["name"] = ds.name;
    manifest["classes"] = {{"base", ds.base_classes}, {"novel", ds.novel_classes}};
    manifest["splits"] = {{"labelled", n_labelled},
                          {"unlabelled", ds.train_y.size() - n_labelled},
                          {"test", ds.test_y.size()}};
    manifest["payload"] = shape_to_json(ds.payload);
    manifest["files"] = {"train_x.pdm1", "train_y.pdm1", "test_x.pdm1", "test_y.pdm1"};

    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("save_dataset: cannot write manifest");
    out << manifest.dump(2) << "\n";

    save_pdm1(dir / "train_x.pdm1", ds.train_x);
    save_pdm1(dir / "train_y.pdm1", labels_to_matrix(ds.train_y));
    save_pdm1(dir / "test_x.pdm1", ds.test_x);
    save_pdm1(dir / "test_y.pdm1", labels_to_matrix(ds.test_y));
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("load_dataset: missing manifest in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Malformed(std::string("load_dataset: bad manifest JSON: ") + e.what());
    }

    Dataset ds;
    try {
        ds.name = manifest.at("name").get<std::string>();
        ds.base_classes = manifest.at("classes").at("base").get<std::vector<int>>();
        ds.novel_classes = manifest.at("classes").at("novel").get<std::vector<int>>();
        ds.payload = shape_from_json(manifest.at("payload"));
    } catch (const json::exception& e) {
        throw Malformed(std::string("load_dataset: manifest field error: ") + e.what());
    }

    std::set<int> base(ds.base_classes.begin(), ds.base_classes.end());
    for (int c : ds.novel_classes) {
        if (base.count(c)) {
            throw PartitionViolation("load_dataset: class " + std::to_string(c) +
                                     " listed as both base and novel");
        }
    }

    ds.train_x = load_pdm1(dir / "train_x.pdm1");
    ds.train_y = labels_from_matrix(load_pdm1(dir / "train_y.pdm1"));
    ds.test_x = load_pdm1(dir / "test_x.pdm1");
    ds.test_y = labels_from_matrix(load_pdm1(dir / "test_y.pdm1"));

    const std::size_t flat = static_cast<std::size_t>(ds.payload.flat_dim());
    if (ds.train_x.cols() != flat || ds.test_x.cols() != flat) {
        throw Malformed("load_dataset: payload width does not match manifest shape");
    }
    if (ds.train_x.rows() != ds.train_y.size() || ds.test_x.rows() != ds.test_y.size()) {
        throw Malformed("load_dataset: sample/label count mismatch");
    }

    std::set<int> all(ds.base_classes.begin(), ds.base_classes.end());
    all.insert(ds.novel_classes.begin(), ds.novel_classes.end());
    std::size_t n_labelled = 0;
    for (int y : ds.train_y) {
        if (!all.count(y)) throw Malformed("load_dataset: train label outside class lists");
        if (base.count(y)) ++n_labelled;
    }
    for (int y : ds.test_y) {
        if (!all.count(y)) throw Malformed("load_dataset: test label outside class lists");
    }
    try {
        const auto splits = manifest.at("splits");
        if (splits.at("labelled").get<std::size_t>() != n_labelled ||
            splits.at("unlabelled").get<std::size_t>() != ds.train_y.size() - n_labelled ||
            splits.at("test").get<std::size_t>() != ds.test_y.size()) {
            throw Malformed("load_dataset: split counts do not match stored data");
        }
    } catch (const json::exception& e) {
        throw Malformed(std::string("load_dataset: manifest splits error: ") + e.what());
    }
    return ds;
}

DatasetSplit make_splits(const Dataset& ds, const std::vector<int>& base_ids) {
    std::set<int> all(ds.base_classes.begin(), ds.base_classes.end());
    all.insert(ds.novel_classes.begin(), ds.novel_classes.end());
    std::set<int> base(base_ids.begin(), base_ids.end());
    for (int c : base) {
        if (!all.count(c)) {
            throw PartitionViolation("make_splits: base id " + std::to_string(c) +
                                     " not a dataset class");
        }
    }

    DatasetSplit split;
    split.payload = ds.payload;
    split.base_classes.assign(base.begin(), base.end());
    for (int c : all) {
        if (!base.count(c)) split.novel_classes.push_back(c);
    }

    // Labels are remapped to head indices: base classes take [0, n_base) in
    // split.base_classes order, novel classes take [0, K) in
    // split.novel_classes order (offset by n_base where a C-way id is needed).
    auto base_index = [&](int c) {
        return static_cast<int>(std::lower_bound(split.base_classes.begin(),
                                                 split.base_classes.end(), c) -
                                split.base_classes.begin());
    };
    auto novel_index = [&](int c) {
        return static_cast<int>(std::lower_bound(split.novel_classes.begin(),
                                                 split.novel_classes.end(), c) -
                                split.novel_classes.begin());
    };

    std::vector<std::size_t> lab_rows, unlab_rows;
    for (std::size_t i = 0; i < ds.train_y.size(); ++i) {
        if (base.count(ds.train_y[i])) {
            lab_rows.push_back(i);
        } else {
            unlab_rows.push_back(i);
        }
    }

    split.labelled.x = Matrix(lab_rows.size(), ds.train_x.cols());
    for (std::size_t r = 0; r < lab_rows.size(); ++r) {
        split.labelled.x.set_row(r, ds.train_x.row(lab_rows[r]));
        split.labelled.y.push_back(base_index(ds.train_y[lab_rows[r]]));
    }
    split.unlabelled.x = Matrix(unlab_rows.size(), ds.train_x.cols());
    for (std::size_t r = 0; r < unlab_rows.size(); ++r) {
        split.unlabelled.x.set_row(r, ds.train_x.row(unlab_rows[r]));
        split.eval.unlabelled_truth.push_back(novel_index(ds.train_y[unlab_rows[r]]));
    }

    split.test.x = ds.test_x;
    const int n_base = static_cast<int>(split.base_classes.size());
    for (int y : ds.test_y) {
        split.test.y.push_back(base.count(y) ? base_index(y) : n_base + novel_index(y));
    }
    return split;
}

} // namespace ncd
