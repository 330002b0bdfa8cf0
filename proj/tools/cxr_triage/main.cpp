#include <iostream>

#include "cxr_triage/commands.hpp"

int main(int argc, char** argv) {
  return cxr::cli::run(argc, argv, std::cout, std::cerr);
}
