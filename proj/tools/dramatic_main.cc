#include <string>
#include <vector>

#include "dramatic/cli.h"

int main(int argc, char** argv) {
  return dramatic::RunCli(std::vector<std::string>(argv + 1, argv + argc));
}
