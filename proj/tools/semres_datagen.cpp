// Writes the synthetic KEEL-format benchmark suite (20 imbalanced datasets
// shaped like the usual KEEL suite) for demos and tests.

#include <iostream>

#include <CLI11.hpp>

#include "semres/datagen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic imbalanced benchmark generator"};
  std::string out_dir = "data";
  std::uint64_t seed = 7;
  std::string only;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "generation seed");
  app.add_option("--only", only, "generate a single named dataset");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!only.empty()) {
      const auto& shape = semres::datagen::shape_by_name(only);
      std::filesystem::create_directories(out_dir);
      const auto path = std::filesystem::path(out_dir) / (shape.name + ".dat");
      std::ofstream out(path);
      out << semres::datagen::to_keel(semres::datagen::generate(shape, seed), shape.name);
      std::cout << path.string() << "\n";
      return 0;
    }
    for (const auto& path : semres::datagen::write_benchmark_suite(out_dir, seed))
      std::cout << path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
