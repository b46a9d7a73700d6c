#include "m3dseg/cli/cli.hpp"

int main(int argc, char** argv) { return m3dseg::cli::run(argc, argv); }
