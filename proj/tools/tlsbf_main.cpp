#include "tlsbf/cli.hpp"

#include <iostream>

int
main(int argc, char** argv)
{
  return tlsbf::cli_main({ argv + 1, argv + argc }, std::cout, std::cerr);
}
