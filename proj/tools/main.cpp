#include "geoxray/cli.hpp"

int main(int argc, char** argv) {
  return geoxray::cli::run(argc, argv);
}
