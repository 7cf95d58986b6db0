#include "lca/cli.hpp"

int main(int argc, char** argv) { return lca::run_command(argc, argv); }
