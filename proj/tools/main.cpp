#include "bns/cli.hpp"

int main(int argc, char** argv) { return bns::cli::run(argc, argv); }
