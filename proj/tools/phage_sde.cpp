#include "phage/cli.hpp"

int main(int argc, char** argv) { return phage::cli::run(argc, argv); }
