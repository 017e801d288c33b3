#include "lirr/cli.hpp"

int main(int argc, char** argv) { return lirr::run_cli(argc, argv); }
