#include "scitikz/cli.hpp"

int main(int argc, char** argv) { return scitikz::run_cli(argc, argv); }
