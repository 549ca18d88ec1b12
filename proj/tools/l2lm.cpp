#include "l2lm/cli.hpp"

int main(int argc, char **argv)
{
  return l2lm::run_cli(argc, argv);
}
