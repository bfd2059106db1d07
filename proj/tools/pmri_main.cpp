#include "pmri/cli.hpp"

int main(int argc, char** argv) { return pmri::run_cli(argc, argv); }
