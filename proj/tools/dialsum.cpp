#include "dialsum/cli.hpp"

int main(int argc, char** argv) { return dialsum::cli::run(argc, argv); }
