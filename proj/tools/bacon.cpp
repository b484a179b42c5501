#include "bacon/cli.hpp"
#include "bacon/runtime.hpp"

int main(int argc, char** argv) {
  bacon::configure_allocator();
  return bacon::cli::run(argc, argv);
}
