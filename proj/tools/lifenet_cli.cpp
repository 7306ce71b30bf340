#include "lifenet/cli.hpp"
#include "lifenet/runtime.hpp"

int main(int argc, char** argv) {
  lifenet::tune_allocator();
  return lifenet::run_cli(argc, argv);
}
