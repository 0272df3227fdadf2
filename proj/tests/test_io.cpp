#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <string>
#include <vector>

#include "psikit/psikit.hpp"

using namespace psikit;

namespace {

std::vector<std::uint8_t> idx_image_stream(std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                           const std::vector<std::uint8_t>& payload) {
  ByteWriter b;
  b.u32_be(0x00000803u);
  b.u32_be(n);
  b.u32_be(h);
  b.u32_be(w);
  b.raw(payload.data(), payload.size());
  return std::move(b.bytes);
}

}  // namespace

TEST_CASE("single-pixel IDX stream parses to intensity 1.0") {
  const auto bytes = idx_image_stream(1, 1, 1, {255});
  const IdxImages imgs = read_idx_images(bytes);
  CHECK(imgs.count == 1);
  CHECK(imgs.height == 1);
  CHECK(imgs.width == 1);
  CHECK(imgs.image(0).pixels[0] == 1.0f);
}

TEST_CASE("IDX truncation names the expected and actual byte counts") {
  const auto bytes = idx_image_stream(2, 2, 2, {1, 2, 3, 4, 5, 6, 7});  // needs 8, got 7
  try {
    read_idx_images(bytes);
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("expected 8 bytes, got 7") != std::string::npos);
  }
}

TEST_CASE("IDX trailing bytes are rejected") {
  auto bytes = idx_image_stream(1, 2, 2, {1, 2, 3, 4, 9});
  CHECK_THROWS_AS(read_idx_images(bytes), FormatError);
}

TEST_CASE("bad magic and wrong rank are distinct diagnostics") {
  auto bytes = idx_image_stream(1, 1, 1, {7});
  bytes[0] = 0xff;
  CHECK_THROWS_WITH(read_idx_images(bytes), Catch::Matchers::ContainsSubstring("not IDX"));

  ByteWriter labels_as_images;
  labels_as_images.u32_be(0x00000801u);
  labels_as_images.u32_be(1);
  labels_as_images.u8(3);
  CHECK_THROWS_WITH(read_idx_images(labels_as_images.bytes),
                    Catch::Matchers::ContainsSubstring("not an image file"));
  CHECK(read_idx_labels(labels_as_images.bytes) == std::vector<int>{3});
}

TEST_CASE("IDX round trip is byte-exact") {
  std::vector<GrayImage> images;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    GrayImage img(9, 7);
    for (auto& p : img.pixels) p = static_cast<float>(rng.next_unit());
    images.push_back(std::move(img));
  }
  const auto bytes = write_idx_images(images);
  const auto again = write_idx_images([&] {
    const IdxImages parsed = read_idx_images(bytes);
    std::vector<GrayImage> out;
    for (int i = 0; i < parsed.count; ++i) out.push_back(parsed.image(i));
    return out;
  }());
  CHECK(bytes == again);
}

TEST_CASE("label file for 800 samples is exactly 808 bytes") {
  const std::vector<int> labels(800, 3);
  CHECK(write_idx_labels(labels).size() == 808);
}

TEST_CASE("empty datasets cannot be written") {
  CHECK_THROWS_AS(write_idx_images({}), std::invalid_argument);
  CHECK_THROWS_AS(write_idx_labels({}), std::invalid_argument);
}

TEST_CASE("mixed image sizes are rejected") {
  std::vector<GrayImage> images;
  images.emplace_back(8, 8, 0.1f);
  images.emplace_back(9, 8, 0.1f);
  CHECK_THROWS_AS(write_idx_images(images), std::invalid_argument);
}

TEST_CASE("IDX parser survives random input (mini fuzz)") {
  Rng rng(2024);
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::uint8_t> junk(rng.next_below(64));
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng.next_u64());
    try {
      read_idx_images(junk);
    } catch (const FormatError&) {
    }
    try {
      read_idx_labels(junk);
    } catch (const FormatError&) {
    }
  }
  SUCCEED("no crashes");
}

// ---------------------------------------------------------------------------

TEST_CASE("manifest round trip is lossless including unknown keys") {
  std::vector<int> labels = {4, 0, 7};
  std::vector<VariantTag> tags(3);
  tags[0].kind = VariantKind::Outline;
  tags[0].params = {{"n", "7"}, {"stroke", "2"}};
  tags[1].kind = VariantKind::Ideal;
  tags[1].params = {{"radius", "0.81234567890123456"}, {"zz_custom", "kept"}};
  tags[2].kind = VariantKind::Glyph;
  const std::string text = write_manifest(labels, tags);
  const auto records = parse_manifest(text);
  REQUIRE(records.size() == 3);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].label == labels[i]);
    CHECK(records[i].tag == tags[i]);
  }
}

TEST_CASE("manifest example line matches the documented shape") {
  std::vector<VariantTag> tags(1);
  tags[0].kind = VariantKind::Outline;
  tags[0].params = {{"n", "7"}, {"stroke", "2"}};
  CHECK(write_manifest({7}, tags) == "0,7,outline,n=7,stroke=2\n");
}

TEST_CASE("manifest with an index gap reports the line number") {
  const std::string text = "0,1,filled\n2,1,filled\n";
  CHECK_THROWS_WITH(parse_manifest(text), Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("manifest values may not contain reserved characters") {
  std::vector<VariantTag> tags(1);
  tags[0].params = {{"font", "has,comma"}};
  CHECK_THROWS_AS(write_manifest({0}, tags), std::invalid_argument);
}

TEST_CASE("large generated manifest round trips") {
  std::vector<int> labels;
  std::vector<VariantTag> tags;
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    labels.push_back(static_cast<int>(rng.next_below(10)));
    VariantTag t;
    t.kind = static_cast<VariantKind>(rng.next_below(6));
    t.params["value"] = detail::format_double(rng.next_unit());
    t.params["idx"] = std::to_string(i);
    tags.push_back(std::move(t));
  }
  const auto records = parse_manifest(write_manifest(labels, tags));
  REQUIRE(records.size() == tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    CHECK(records[i].label == labels[i]);
    CHECK(records[i].tag == tags[i]);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("PGM header is the canonical P5 form and round trips") {
  GrayImage img(3, 2);
  img.pixels = {0.0f, 0.5f, 1.0f, 0.25f, 0.75f, 0.1f};
  const auto bytes = write_pgm(img);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  CHECK(head == "P5\n3 2\n255\n");
  const GrayImage back = read_pgm(bytes);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 0.51f / 255.0f);
}

TEST_CASE("PGM parser accepts comments and rejects non-P5 input") {
  const std::string with_comment = "P5\n# a comment\n2 1\n255\nAB";
  const GrayImage img =
      read_pgm(reinterpret_cast<const std::uint8_t*>(with_comment.data()), with_comment.size());
  CHECK(img.width == 2);
  const std::string p2 = "P2\n2 1\n255\n65 66";
  CHECK_THROWS_AS(read_pgm(reinterpret_cast<const std::uint8_t*>(p2.data()), p2.size()),
                  FormatError);
  const std::string wide = "P5\n2 1\n65535\nAB";
  CHECK_THROWS_AS(read_pgm(reinterpret_cast<const std::uint8_t*>(wide.data()), wide.size()),
                  FormatError);
}

// ---------------------------------------------------------------------------

TEST_CASE("crc32 matches the standard test vector") {
  const char* s = "123456789";
  CHECK(crc32(reinterpret_cast<const std::uint8_t*>(s), 9) == 0xcbf43926u);
}

TEST_CASE("epoch CSV round trips") {
  std::vector<EpochCsvRow> rows = {{1, "train", 0.5}, {1, "outline", 0.25}, {2, "train", 0.75}};
  const auto parsed = read_epoch_csv(write_epoch_csv(rows));
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[1].split == "outline");
  CHECK(parsed[1].accuracy == Catch::Approx(0.25));
  CHECK(parsed[2].epoch == 2);
}

TEST_CASE("SVG chart uses only polyline, line and text elements") {
  ChartSpec spec;
  spec.title = "demo";
  spec.x_label = "x";
  spec.y_label = "y";
  spec.dashed_hline = 0.5;
  spec.series.push_back({"a", {{0.0, 0.1}, {0.5, 0.6}, {1.0, 0.9}}});
  const std::string svg = svg_line_chart(spec);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("<rect") == std::string::npos);
  CHECK(svg.find("<circle") == std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
