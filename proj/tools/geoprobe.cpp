#include "geoprobe/cli.hpp"

int main(int argc, char** argv) { return geoprobe::cli::run(argc, argv); }
