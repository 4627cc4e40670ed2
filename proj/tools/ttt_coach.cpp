#include "ttt/service.hpp"

int main(int argc, char** argv) { return ttt::cli_main(argc, argv); }
