#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ncd/clustering.hpp"
#include "ncd/data.hpp"

using namespace ncd;

TEST_CASE("gaussians: determinism and split sizes") {
    Dataset a = synth_gaussians(3, 2, 8, 20, 4.0, 42);
    Dataset b = synth_gaussians(3, 2, 8, 20, 4.0, 42);
    CHECK(a.train_x.data() == b.train_x.data());
    CHECK(a.test_x.data() == b.test_x.data());
    CHECK(a.train_y == b.train_y);

    CHECK(a.train_x.rows() == 5 * 16);
    CHECK(a.test_x.rows() == 5 * 4);
    CHECK(a.base_classes == std::vector<int>{0, 1, 2});
    CHECK(a.novel_classes == std::vector<int>{3, 4});

    Dataset c = synth_gaussians(3, 2, 8, 20, 4.0, 43);
    CHECK(a.train_x.data() != c.train_x.data());
}

TEST_CASE("gaussians: oracle k-means at high separation, chance at zero") {
    Dataset sep = synth_gaussians(0, 4, 32, 50, 10.0, 7);
    std::vector<int> truth = sep.train_y;
    ClusterResult km = kmeans(sep.train_x, 4, 7);
    CHECK(hungarian_acc(km.labels, truth, 4).acc >= 0.99);

    Dataset flat = synth_gaussians(0, 4, 32, 50, 0.0, 7);
    ClusterResult km0 = kmeans(flat.train_x, 4, 7);
    const double acc0 = hungarian_acc(km0.labels, flat.train_y, 4).acc;
    CHECK(acc0 <= 0.55); // coincident classes stay near chance (1/k)
}

TEST_CASE("glyphs: zero jitter renders identical samples within a class") {
    Dataset ds = synth_glyphs(1, 1, 20, 10, 5, 0.0);
    // all train rows of class 0 are byte-identical
    for (std::size_t i = 1; i < 8; ++i) {
        if (ds.train_y[i] != ds.train_y[0]) continue;
        for (std::size_t j = 0; j < ds.train_x.cols(); ++j) {
            CHECK(ds.train_x(i, j) == ds.train_x(0, j));
        }
    }
    for (float p : ds.train_x.data()) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }
    CHECK_THROWS(synth_glyphs(1, 1, 8, 10, 5));
}

TEST_CASE("glyphs: raw pixels separate most class pairs") {
    Dataset ds = synth_glyphs(0, 6, 20, 30, 11);
    std::size_t separable_pairs = 0, total_pairs = 0;
    for (int a = 0; a < 6; ++a) {
        for (int b = a + 1; b < 6; ++b) {
            std::vector<std::size_t> rows;
            std::vector<int> truth;
            for (std::size_t i = 0; i < ds.train_y.size(); ++i) {
                if (ds.train_y[i] == a || ds.train_y[i] == b) {
                    rows.push_back(i);
                    truth.push_back(ds.train_y[i] == a ? 0 : 1);
                }
            }
            Matrix x(rows.size(), ds.train_x.cols());
            for (std::size_t r = 0; r < rows.size(); ++r) x.set_row(r, ds.train_x.row(rows[r]));
            ClusterResult km = kmeans(x, 2, 3);
            if (hungarian_acc(km.labels, truth, 2).acc >= 0.9) ++separable_pairs;
            ++total_pairs;
        }
    }
    CHECK(static_cast<double>(separable_pairs) / total_pairs >= 0.8);
}

TEST_CASE("dataset save/load round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "ncd_data_test";
    std::filesystem::remove_all(dir);
    Dataset ds = synth_gaussians(2, 2, 6, 10, 3.0, 9);
    save_dataset(dir, ds);
    Dataset back = load_dataset(dir);
    CHECK(back.name == ds.name);
    CHECK(back.train_x.data() == ds.train_x.data());
    CHECK(back.test_x.data() == ds.test_x.data());
    CHECK(back.train_y == ds.train_y);
    CHECK(back.test_y == ds.test_y);
    CHECK(back.base_classes == ds.base_classes);
    CHECK(back.novel_classes == ds.novel_classes);
    CHECK(back.payload.dim == 6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest validation failures") {
    const auto dir = std::filesystem::temp_directory_path() / "ncd_data_bad";
    std::filesystem::remove_all(dir);
    Dataset ds = synth_gaussians(2, 2, 6, 10, 3.0, 9);
    save_dataset(dir, ds);

    // overlapping base/novel class lists
    {
        nlohmann::json manifest;
        std::ifstream in(dir / "manifest.json");
        in >> manifest;
        in.close();
        manifest["classes"]["novel"][0] = 1; // already a base class
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump(2);
    }
    CHECK_THROWS_AS(load_dataset(dir), PartitionViolation);

    // restore, then truncate a payload
    save_dataset(dir, ds);
    {
        auto size = std::filesystem::file_size(dir / "train_x.pdm1");
        std::filesystem::resize_file(dir / "train_x.pdm1", size - 4);
    }
    CHECK_THROWS_AS(load_dataset(dir), Malformed);

    CHECK_THROWS_AS(load_dataset(dir / "missing"), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("make_splits partitions and strips novel labels") {
    Dataset ds = synth_gaussians(5, 5, 8, 10, 3.0, 13);
    DatasetSplit split = make_splits(ds, ds.base_classes);
    CHECK(split.base_classes.size() == 5);
    CHECK(split.novel_classes.size() == 5);
    CHECK(split.labelled.x.rows() == 5 * 8);
    CHECK(split.unlabelled.x.rows() == 5 * 8);
    CHECK(split.test.x.rows() == 10 * 2);
    CHECK(split.labelled.y.size() == split.labelled.x.rows());
    CHECK(split.eval.unlabelled_truth.size() == split.unlabelled.x.rows());
    for (int y : split.labelled.y) {
        CHECK(y >= 0);
        CHECK(y < 5);
    }
    for (int y : split.eval.unlabelled_truth) {
        CHECK(y >= 0);
        CHECK(y < 5);
    }
    for (int y : split.test.y) {
        CHECK(y >= 0);
        CHECK(y < 10);
    }

    // all classes base: the unlabelled split degenerates to empty
    std::vector<int> all_ids = ds.base_classes;
    all_ids.insert(all_ids.end(), ds.novel_classes.begin(), ds.novel_classes.end());
    DatasetSplit sup = make_splits(ds, all_ids);
    CHECK(sup.unlabelled.x.rows() == 0);
    CHECK(sup.labelled.x.rows() == 10 * 8);

    // 80/20 style split
    Dataset big = synth_gaussians(8, 2, 4, 10, 3.0, 13);
    DatasetSplit s80 = make_splits(big, big.base_classes);
    CHECK(s80.base_classes.size() == 8);
    CHECK(s80.novel_classes.size() == 2);

    CHECK_THROWS_AS(make_splits(ds, std::vector<int>{0, 99}), PartitionViolation);
}
