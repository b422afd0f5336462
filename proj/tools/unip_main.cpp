#include "unip/cli.hpp"

int main(int argc, char** argv) { return unip::run(argc, argv); }
