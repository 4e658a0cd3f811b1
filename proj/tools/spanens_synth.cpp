// Writes the synthetic table-LM suites used by the tests to disk, for
// trying the CLI without a model server.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spanens/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic table-LM suites", "spanens-synth"};
  std::string out_dir;
  std::string kind = "robustness";
  std::size_t examples = 200;
  std::uint64_t seed = 7;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--suite", kind, "robustness | complementary")->capture_default_str();
  app.add_option("--examples", examples, "number of examples")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    spanens::synthetic::Suite suite;
    if (kind == "robustness") {
      suite = spanens::synthetic::robustness_suite(examples, seed);
    } else if (kind == "complementary") {
      suite = spanens::synthetic::complementary_suite(examples, seed);
    } else {
      std::cerr << "error: unknown suite '" << kind << "'\n";
      return 2;
    }
    spanens::synthetic::write_suite(suite, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << out_dir << '\n';
  return 0;
}
