#include "calfweight/cli.hpp"

int main(int argc, char** argv) { return calfweight::cli::run(argc, argv); }
