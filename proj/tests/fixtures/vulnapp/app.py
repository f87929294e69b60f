import os
import requests

API_KEY = "AKIA1234567890ABCDEF"
DB_PASSWORD = "hunter2-prod"
DEBUG = True

def fetch(url):
    return requests.get(url, timeout=5)

def main():
    print("starting, verbose mode:", DEBUG)
    fetch("https://api.example.com/v1/items")

if __name__ == "__main__":
    main()
