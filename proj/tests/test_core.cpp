#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mml/dataset.hpp"
#include "mml/labels.hpp"

using namespace mml;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mml_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& body) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << body;
}

void write_tiny_png(const fs::path& p, double shade = 0.5) {
  GrayImage img = GrayImage::Constant(8, 8, shade);
  img(3, 4) = 1.0;
  fs::create_directories(p.parent_path());
  save_gray_png(img, p);
}

// minimal valid profile on disk
void write_profile(const fs::path& root, const std::string& id,
                   const std::string& labels_json, int n_images = 3) {
  const fs::path dir = root / "profiles" / id;
  write_text(dir / "meta.json", "{\"id\":\"" + id +
                                    "\",\"region\":\"iran\",\"gender\":\"female\","
                                    "\"labels\":" + labels_json + "}");
  std::string caps = "[";
  for (int i = 0; i < n_images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d.png", i);
    write_tiny_png(dir / "images" / name, 0.2 + 0.1 * i);
    if (i) caps += ",";
    caps += std::string("{\"image\":\"") + name + "\",\"caption\":\"hello world " +
            std::to_string(i) + "\",\"hashtags\":[\"fun\"],\"geo\":null}";
  }
  caps += "]";
  write_text(dir / "captions.json", caps);
}

}  // namespace

TEST_CASE("label set round-trips all 31 non-empty masks", "[core]") {
  for (unsigned mask = 1; mask < 32; ++mask) {
    auto ls = GlasserLabelSet::from_mask(mask);
    auto back = GlasserLabelSet::from_bits(ls.to_bits());
    REQUIRE(back == ls);
    REQUIRE(GlasserLabelSet::from_names(ls.to_names()) == ls);
  }
  REQUIRE_THROWS_AS(GlasserLabelSet::from_mask(0), ValidationError);
  REQUIRE_THROWS_AS(GlasserLabelSet::from_bits("00000"), ValidationError);
  REQUIRE_THROWS_AS(GlasserLabelSet::from_names({}), ValidationError);
  REQUIRE_THROWS_AS(GlasserLabelSet::from_names({"joy"}), ValidationError);
}

TEST_CASE("labels_to_matrix fixed order", "[core]") {
  ProfileRecord all;
  all.id = "a";
  all.labels = GlasserLabelSet::from_mask(0b11111);
  ProfileRecord fun_only;
  fun_only.id = "b";
  fun_only.labels = GlasserLabelSet::from_names({"fun"});

  auto m = labels_to_matrix({all, fun_only});
  REQUIRE(m.rows() == 5);
  REQUIRE(m.cols() == 2);
  for (int j = 0; j < 5; ++j) REQUIRE(m(j, 0) == 1);
  REQUIRE(m(0, 1) == -1);
  REQUIRE(m(1, 1) == -1);
  REQUIRE(m(2, 1) == -1);
  REQUIRE(m(3, 1) == -1);
  REQUIRE(m(4, 1) == 1);
}

TEST_CASE("labels_to_matrix equals per-entry membership test", "[core]") {
  std::vector<GlasserLabelSet> sets = {GlasserLabelSet::from_names({"survival", "power"}),
                                       GlasserLabelSet::from_names({"belonging"}),
                                       GlasserLabelSet::from_names({"freedom", "fun", "survival"})};
  auto m = labelsets_to_matrix(sets);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      const int expected = sets[static_cast<size_t>(i)].has(j) ? 1 : -1;  // brute force
      REQUIRE(m(j, i) == expected);
    }
}

TEST_CASE("matrix_to_labelsets inverts labels_to_matrix", "[core]") {
  Rng rng(7);
  std::vector<GlasserLabelSet> sets;
  for (int i = 0; i < 50; ++i)
    sets.push_back(GlasserLabelSet::from_mask(1 + static_cast<unsigned>(rng.uniform_index(31))));
  auto m = labelsets_to_matrix(sets);
  auto back = matrix_to_labelsets(m);
  REQUIRE(back == sets);
}

TEST_CASE("load_dataset on a small fixture", "[core]") {
  auto root = temp_dir("load_fixture");
  write_profile(root, "p01", "[\"survival\",\"fun\"]");
  write_profile(root, "p02", "[\"belonging\"]");

  auto res = load_dataset(root);
  REQUIRE(res.dataset.size() == 2);
  REQUIRE(res.dataset.label_matrix.rows() == 5);
  REQUIRE(res.dataset.label_matrix.cols() == 2);
  REQUIRE(res.report.n_profiles == 2);
  REQUIRE(res.report.n_images == 6);
  REQUIRE(res.report.n_captions == 6);
  REQUIRE(res.dataset.profiles[0].id == "p01");
  REQUIRE(res.dataset.profiles[0].gender == Gender::female);
  REQUIRE(res.dataset.profiles[0].labels == GlasserLabelSet::from_names({"survival", "fun"}));
  REQUIRE(validate_dataset(res.dataset).ok());
}

TEST_CASE("load_dataset hard errors", "[core]") {
  SECTION("empty label set") {
    auto root = temp_dir("load_empty_labels");
    write_profile(root, "p01", "[]");
    REQUIRE_THROWS_WITH(load_dataset(root), Catch::Matchers::ContainsSubstring("empty label set"));
  }
  SECTION("missing meta names the profile") {
    auto root = temp_dir("load_missing_meta");
    write_profile(root, "p01", "[\"fun\"]");
    fs::remove(root / "profiles" / "p01" / "meta.json");
    REQUIRE_THROWS_WITH(load_dataset(root), Catch::Matchers::ContainsSubstring("p01"));
  }
}

TEST_CASE("unreadable image excluded with warning", "[core]") {
  auto root = temp_dir("load_bad_image");
  write_profile(root, "p01", "[\"fun\"]", 2);
  write_text(root / "profiles" / "p01" / "images" / "broken.png", "this is not a png");

  auto res = load_dataset(root);
  REQUIRE(res.dataset.profiles[0].image_refs.size() == 2);
  REQUIRE(res.report.excluded_images == std::vector<std::string>{"p01/broken.png"});
  bool warned = false;
  for (const auto& w : res.report.warnings) warned |= w.find("broken.png") != std::string::npos;
  REQUIRE(warned);
}

TEST_CASE("validate_dataset reports violations without mutating", "[core]") {
  Dataset d;
  ProfileRecord a;
  a.id = "x";
  a.labels = GlasserLabelSet::from_names({"fun"});
  a.image_refs = {"img.png"};
  Caption good{"img.png", "t", {}, std::nullopt};
  Caption orphan{"gone.png", "t", {}, std::nullopt};
  a.captions = {good, orphan};
  d.profiles = {a, a};  // duplicate id
  d.label_matrix = labels_to_matrix(d.profiles);

  auto rep = validate_dataset(d);
  REQUIRE_FALSE(rep.ok());
  bool has_dup = false, has_orphan = false;
  for (const auto& v : rep.violations) {
    has_dup |= v.find("duplicate id") != std::string::npos;
    has_orphan |= v.find("orphaned caption") != std::string::npos;
  }
  REQUIRE(has_dup);
  REQUIRE(has_orphan);
  REQUIRE(d.profiles.size() == 2);
}
