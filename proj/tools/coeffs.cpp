// coeffs: print the collocation matrices for given (k, r).

#include <iostream>

#include <CLI11.hpp>

#include "rknfc/coeffs.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Coefficient matrices of the k-stage collocation method"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help message and exit");

  int k = 4;
  int r = 2;
  auto* dump = app.add_subcommand("dump", "write all matrices in the plain-text matrix format");
  dump->add_option("--k", k, "number of Gauss-Legendre stages")->required();
  dump->add_option("--r", r, "number of Legendre coefficients")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    rknfc::dump_coefficients(std::cout, rknfc::build_coefficients(k, r));
  } catch (const rknfc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
