// Writes the synthetic chest-film fixture set used by the end-to-end tests:
//   <out>/metadata.csv and <out>/images/*.png
//
// 40 AP/PA studies (20 intubated, 20 not) plus a few lateral and CT rows that
// ingest must drop. Intubated films carry a bright opacity in the upper left
// of the central square, the others in the lower right; four films have the
// opacity swapped so classification is not perfect.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cxr/csv.hpp"
#include "cxr/png_io.hpp"
#include "cxr/rng.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kStudies = 40;
constexpr int kExtra = 5;  // 4 lateral + 1 CT

cxr::imaging::RawImage make_film(int i, bool intubated, cxr::Rng& rng) {
  cxr::imaging::RawImage img;
  img.width = 64 + (i * 37) % 97;
  img.height = 64 + (i * 53) % 89;
  img.channels = i % 7 == 3 ? 3 : 1;
  img.bit_depth = i % 7 == 5 ? 16 : 8;
  const double max = img.max_value();

  const int side = std::min(img.width, img.height);
  const double ox = (img.width - side) / 2.0;
  const double oy = (img.height - side) / 2.0;
  const bool hard = i == 6 || i == 13 || i == 27 || i == 34;
  const bool upper_left = intubated != hard;
  const double cx = ox + (upper_left ? 0.33 : 0.67) * side;
  const double cy = oy + (upper_left ? 0.38 : 0.62) * side;
  const double radius = 0.2 * side;

  img.samples.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double r = std::hypot(x - cx, y - cy) / radius;
      double v = 0.25 + 0.15 * y / img.height;      // soft vertical gradient
      if (r < 1.0) v += 0.55 * (1.0 - r * r);       // opacity
      v += 0.08 * rng.uniform_symmetric();          // film noise
      const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * max));
      const std::size_t base = (static_cast<std::size_t>(y) * img.width + x) * img.channels;
      for (int c = 0; c < img.channels; ++c) img.samples[base + c] = s;
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic_fixture OUT_DIR\n";
    return 1;
  }
  const fs::path out = argv[1];
  fs::create_directories(out / "images");
  cxr::Rng rng(20201011);

  std::ofstream meta(out / "metadata.csv", std::ios::binary);
  const std::vector<std::string> header{"patientid", "offset", "sex",      "age",
                                        "finding",   "RT_PCR_positive",   "survival",
                                        "intubated", "view",   "modality", "date",
                                        "filename",  "clinical_notes"};
  cxr::csv::write_row(meta, header);

  for (int i = 0; i < kStudies + kExtra; ++i) {
    const bool study = i < kStudies;
    const bool intubated = i % 2 == 0;
    std::string finding = i % 5 <= 2   ? "Pneumonia/Viral/COVID-19"
                          : i % 5 == 3 ? "Pneumonia/Bacterial/Streptococcus"
                                       : "No Finding";
    std::string view = i % 3 == 0 ? "PA" : i % 3 == 1 ? "AP" : "AP Supine";
    std::string modality = "X-ray";
    std::string intub = intubated ? "Y" : "N";
    if (!study) {
      view = i == kStudies + kExtra - 1 ? "Axial" : "L";
      modality = i == kStudies + kExtra - 1 ? "CT" : "X-ray";
      intub = "";
    }
    char name[32];
    std::snprintf(name, sizeof name, "synthetic-%03d.png", i + 1);
    const std::string notes =
        i % 4 == 0 ? "Patient admitted, \"short of breath\",\nfollow-up film obtained" : "";

    const auto film = make_film(i, intubated, rng);
    std::ofstream png(out / "images" / name, std::ios::binary);
    png << cxr::imaging::encode_png(film);

    const std::vector<std::string> row{"P" + std::to_string(i / 2 + 1),
                                       std::to_string(i % 4),
                                       i % 2 ? "F" : "M",
                                       std::to_string(40 + i),
                                       finding,
                                       i % 5 <= 2 ? "Y" : "",
                                       "",
                                       intub,
                                       view,
                                       modality,
                                       "2020",
                                       name,
                                       notes};
    cxr::csv::write_row(meta, row);
  }
  return 0;
}
