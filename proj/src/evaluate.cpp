#include "ludvae/evaluate.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "ludvae/errors.hpp"
#include "ludvae/image_io.hpp"
#include "ludvae/metrics.hpp"

namespace fs = std::filesystem;

namespace ludvae {

namespace {

std::map<std::string, std::string> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      out[e.path().filename().string()] = e.path().string();
  return out;
}

}  // namespace

EvalReport evaluate_pairs(const LudVae<float>& model, const std::string& paired_folder,
                          const EvalOptions& options) {
  const auto cleans = list_pngs(fs::path(paired_folder) / "clean");
  const auto noisies = list_pngs(fs::path(paired_folder) / "noisy");

  std::vector<std::string> unmatched;
  for (const auto& [name, _] : cleans)
    if (!noisies.count(name)) unmatched.push_back("clean/" + name);
  for (const auto& [name, _] : noisies)
    if (!cleans.count(name)) unmatched.push_back("noisy/" + name);
  if (!unmatched.empty()) {
    std::string msg = "unpaired filenames in " + paired_folder + ":";
    for (const auto& u : unmatched) msg += " " + u;
    throw IoError(msg);
  }
  if (cleans.empty()) throw IoError("no evaluation pairs in " + paired_folder);

  EvalReport report;
  std::vector<Image> clean_imgs, noisy_imgs, synth_imgs;
  for (const auto& [name, path] : cleans) {
    Image x = read_png(path);
    Image y = read_png(noisies.at(name));
    Image synth;
    if (options.identity) {
      synth = y;
    } else {
      Rng rng(Rng::mix(options.synthesis.seed, Rng::hash(name)));
      synth = generate_c2n(x, model, options.synthesis, rng);
    }
    EvalRow row;
    row.name = name;
    row.psnr = psnr(y, synth);
    row.ssim = ssim(y, synth);
    report.rows.push_back(row);
    clean_imgs.push_back(std::move(x));
    noisy_imgs.push_back(std::move(y));
    synth_imgs.push_back(std::move(synth));
  }
  for (const auto& r : report.rows) {
    report.mean_psnr += r.psnr / report.rows.size();
    report.mean_ssim += r.ssim / report.rows.size();
  }
  report.akld = akld(noisy_imgs, synth_imgs, clean_imgs);
  const InvarianceResult inv = invariance_mmd_protocol(
      model, clean_imgs, noisy_imgs, options.protocol_sigma_x, options.protocol_sigma_y,
      options.mmd_crop, options.mmd_draws, options.synthesis.seed);
  report.invariance_mmd = inv.mean_mmd;
  report.invariance_permutation_threshold = inv.mean_permutation_threshold;
  return report;
}

void write_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report: " + path);
  f << "# scalar metrics\n";
  f << "mean_psnr," << report.mean_psnr << "\n";
  f << "mean_ssim," << report.mean_ssim << "\n";
  f << "akld," << report.akld << "\n";
  f << "invariance_mmd," << report.invariance_mmd << "\n";
  f << "invariance_permutation_threshold," << report.invariance_permutation_threshold << "\n";
  f << "# per-image\nname,psnr,ssim\n";
  for (const auto& r : report.rows) f << r.name << ',' << r.psnr << ',' << r.ssim << '\n';
}

}  // namespace ludvae
